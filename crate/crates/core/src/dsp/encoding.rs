use std::f64::consts::PI;

use num_complex::Complex64;

/// Running differential encoder, d(k) = d(k−1) ⊕ b(k) with d(−1) = 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct DifferentialEncoder {
    prev: u8,
}

impl DifferentialEncoder {
    pub fn encode(&mut self, bit: u8) -> u8 {
        self.prev ^= bit & 1;
        self.prev
    }
}

/// Running differential decoder, b̂(k) = d̂(k) ⊕ d̂(k−1).
#[derive(Debug, Clone, Copy, Default)]
pub struct DifferentialDecoder {
    prev: u8,
}

impl DifferentialDecoder {
    pub fn decode(&mut self, d: u8) -> u8 {
        let b = d ^ self.prev;
        self.prev = d;
        b
    }
}

/// Maps bits to differentially encoded BPSK phases in {0, π}.
pub fn differential_encode(bits: &[u8]) -> Vec<f64> {
    let mut enc = DifferentialEncoder::default();
    bits.iter()
        .map(|&b| if enc.encode(b) == 1 { PI } else { 0.0 })
        .collect()
}

/// Inverse of [`differential_encode`] on hard symbol decisions.
pub fn differential_decode(symbols: &[u8]) -> Vec<u8> {
    let mut dec = DifferentialDecoder::default();
    symbols.iter().map(|&d| dec.decode(d)).collect()
}

/// Hard BPSK decision (1 when the real part is negative) followed by
/// differential decoding. Invariant to a global rotation by π.
pub fn detect_bits(symbols: &[Complex64]) -> Vec<u8> {
    let hard: Vec<u8> = symbols.iter().map(|s| u8::from(s.re < 0.0)).collect();
    differential_decode(&hard)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zeros_encode_to_zero_phase() {
        assert_eq!(differential_encode(&[0, 0, 0, 0]), vec![0.0; 4]);
    }

    #[test]
    fn ones_alternate() {
        assert_eq!(differential_encode(&[1, 1, 1, 1]), vec![PI, 0.0, PI, 0.0]);
    }

    #[test]
    fn encode_detect_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bits: Vec<u8> = (0..10_000).map(|_| rng.random_range(0..2u8)).collect();
        let symbols: Vec<Complex64> = differential_encode(&bits)
            .iter()
            .map(|&p| Complex64::from_polar(1.0, p))
            .collect();
        assert_eq!(detect_bits(&symbols), bits);
    }

    #[test]
    fn detection_is_immune_to_pi_rotation() {
        let bits = [1, 0, 0, 1, 1, 0, 1, 0, 0, 0, 1];
        let rotated: Vec<Complex64> = differential_encode(&bits)
            .iter()
            .map(|&p| Complex64::from_polar(1.0, p + PI))
            .collect();
        let out = detect_bits(&rotated);
        // The first bit is referenced to d(−1) = 0 and flips under rotation.
        assert_eq!(&out[1..], &bits[1..]);
    }
}
