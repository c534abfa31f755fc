/* Sorts 64 pseudo-random integers and checks the result. */

#define N 64

static int data[N];
static unsigned state;

static unsigned xorshift(void)
{
    state ^= state << 13;
    state ^= state >> 17;
    state ^= state << 5;
    return state;
}

static void swap(int *a, int *b)
{
    int t = *a;
    *a = *b;
    *b = t;
}

static int partition(int *v, int lo, int hi)
{
    int pivot = v[hi];
    int i = lo;
    for (int j = lo; j < hi; j++) {
        if (v[j] < pivot) {
            swap(&v[i], &v[j]);
            i++;
        }
    }
    swap(&v[i], &v[hi]);
    return i;
}

static void quicksort(int *v, int lo, int hi)
{
    while (lo < hi) {
        int p = partition(v, lo, hi);
        if (p - lo < hi - p) {
            quicksort(v, lo, p - 1);
            lo = p + 1;
        } else {
            quicksort(v, p + 1, hi);
            hi = p - 1;
        }
    }
}

int main(void)
{
    state = 0x2545F491u;
    for (int i = 0; i < N; i++)
        data[i] = (int)(xorshift() & 0xFFFF) - 0x8000;
    quicksort(data, 0, N - 1);
    for (int i = 1; i < N; i++)
        if (data[i - 1] > data[i])
            return 1;
    return 0;
}
