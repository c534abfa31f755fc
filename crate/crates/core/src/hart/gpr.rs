/// General-purpose register file. x0 is hard-wired to zero.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct GprFile([u32; 32]);

impl GprFile {
    pub fn read(&self, reg: u8) -> u32 {
        self.0[(reg & 31) as usize]
    }

    pub fn write(&mut self, reg: u8, value: u32) {
        if reg & 31 != 0 {
            self.0[(reg & 31) as usize] = value;
        }
    }

    pub fn as_array(&self) -> &[u32; 32] {
        &self.0
    }
}
