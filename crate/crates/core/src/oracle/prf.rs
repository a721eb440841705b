use sha2::{Digest, Sha256};

const DOMAIN_SEPARATOR: &[u8] = b"qmerkle/prf/v1";

/// Keyed pseudorandom function over `(tag, inputs)`.
///
/// Output is the first 128 bits of SHA-256(separator | key | tag | inputs),
/// with every integer encoded little-endian. The tag keeps the functions
/// f, g, t (and the reduction's replacements for them) independent under
/// one key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Prf {
    key: u64,
}

impl Prf {
    pub fn new(key: u64) -> Self {
        Self { key }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn eval(&self, tag: &[u8], inputs: &[u64]) -> u128 {
        let mut hasher = Sha256::new();
        hasher.update(DOMAIN_SEPARATOR);
        hasher.update(self.key.to_le_bytes());
        hasher.update((tag.len() as u32).to_le_bytes());
        hasher.update(tag);
        for x in inputs {
            hasher.update(x.to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut out = [0u8; 16];
        out.copy_from_slice(&digest[..16]);
        u128::from_le_bytes(out)
    }
}

/// Derives a 64-bit value from a tag and a list of integers.
///
/// Used for per-trial seed derivation and for splitting a session seed into
/// independent streams.
pub fn derive_u64(tag: &[u8], parts: &[u64]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"qmerkle/derive/v1");
    hasher.update((tag.len() as u32).to_le_bytes());
    hasher.update(tag);
    for p in parts {
        hasher.update(p.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_tag_separated() {
        let prf = Prf::new(7);
        assert_eq!(prf.eval(b"f", &[1]), prf.eval(b"f", &[1]));
        assert_ne!(prf.eval(b"f", &[1]), prf.eval(b"g", &[1]));
        assert_ne!(prf.eval(b"f", &[1]), Prf::new(8).eval(b"f", &[1]));
        // (1, 2) and (2, 1) are different inputs.
        assert_ne!(prf.eval(b"g", &[1, 2]), prf.eval(b"g", &[2, 1]));
    }

    #[test]
    fn derive_is_stable() {
        assert_eq!(
            derive_u64(b"trial", &[1, 2, 3]),
            derive_u64(b"trial", &[1, 2, 3])
        );
        assert_ne!(
            derive_u64(b"trial", &[1, 2, 3]),
            derive_u64(b"trial", &[1, 3, 2])
        );
    }
}
