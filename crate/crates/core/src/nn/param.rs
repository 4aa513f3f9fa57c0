use super::Scalar;

/// A trainable tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub value: Vec<T>,
    pub grad: Vec<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(value: Vec<T>) -> Self {
        let grad = vec![T::zero(); value.len()];
        Self { value, grad }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![T::zero(); len])
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }
}

/// Anything owning parameters, visited in a fixed order.
pub trait Module<T: Scalar> {
    fn params(&self) -> Vec<&Param<T>>;
    fn params_mut(&mut self) -> Vec<&mut Param<T>>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// FNV-1a over the bit patterns of every parameter value.
    fn fingerprint(&self) -> u64 {
        fingerprint(self.params().into_iter())
    }

    /// True if any accumulated gradient entry is nonzero.
    fn has_grad(&self) -> bool {
        self.params()
            .iter()
            .any(|p| p.grad.iter().any(|g| *g != T::zero()))
    }

    fn flat_values(&self) -> Vec<T> {
        self.params()
            .iter()
            .flat_map(|p| p.value.iter().copied())
            .collect()
    }

    /// Overwrites every parameter value, in the order of `flat_values`.
    fn load_flat_values(&mut self, values: &[T]) {
        assert_eq!(values.len(), self.num_params(), "flat parameter count");
        let mut rest = values;
        for p in self.params_mut() {
            let (head, tail) = rest.split_at(p.len());
            p.value.copy_from_slice(head);
            rest = tail;
        }
    }
}

pub fn fingerprint<'a, T: Scalar>(params: impl Iterator<Item = &'a Param<T>>) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for p in params {
        for v in &p.value {
            for byte in v.to_bits_u64().to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(PRIME);
            }
        }
    }
    h
}
