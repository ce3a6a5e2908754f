//! Keyed pseudorandom permutation over 16-byte key blocks.
//!
//! The permutation is a single AES-128 block encryption under a secret
//! [`PrpKey`]. Keys of up to [`MAX_RAW_KEY_LEN`] bytes are padded injectively
//! into one block before being permuted, so a store can write and query the
//! permuted image of a key and still recover the original with the inverse.

use std::fmt;

use aes::cipher::generic_array::GenericArray;
use aes::cipher::{BlockDecrypt, BlockEncrypt, KeyInit};
use aes::Aes128;
use rand::rngs::OsRng;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

pub const KEY_LEN: usize = 16;
pub const BLOCK_LEN: usize = 16;
/// Longest raw key that fits the single-block encoding.
pub const MAX_RAW_KEY_LEN: usize = BLOCK_LEN - 1;
/// Security parameter in bits.
pub const LAMBDA_BITS: u32 = (KEY_LEN * 8) as u32;

const PAD_MARKER: u8 = 0x80;

/// 128-bit secret parameterizing the permutation. Never written to store files.
#[derive(Clone, PartialEq, Eq)]
pub struct PrpKey([u8; KEY_LEN]);

impl PrpKey {
    /// Draws a fresh key. A seed gives a reproducible key (tests, benchmarks);
    /// without one the key comes from OS entropy.
    pub fn generate(seed: Option<u64>) -> Self {
        let mut bytes = [0u8; KEY_LEN];
        match seed {
            Some(seed) => ChaCha20Rng::seed_from_u64(seed).fill_bytes(&mut bytes),
            None => OsRng.fill_bytes(&mut bytes),
        }
        PrpKey(bytes)
    }

    pub fn from_bytes(bytes: [u8; KEY_LEN]) -> Self {
        PrpKey(bytes)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() != KEY_LEN * 2 {
            return Err(Error::InvalidParams(format!(
                "PRP key must be {} hex digits, got {}",
                KEY_LEN * 2,
                s.len()
            )));
        }
        let mut bytes = [0u8; KEY_LEN];
        for (i, chunk) in s.as_bytes().chunks(2).enumerate() {
            let pair = std::str::from_utf8(chunk).unwrap_or("");
            bytes[i] = u8::from_str_radix(pair, 16)
                .map_err(|_| Error::InvalidParams(format!("bad hex digit pair {pair:?}")))?;
        }
        Ok(PrpKey(bytes))
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }
}

impl fmt::Debug for PrpKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PrpKey(<redacted>)")
    }
}

/// One 16-byte block in the permutation's domain.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct PrpBlock(pub [u8; BLOCK_LEN]);

impl PrpBlock {
    pub fn as_bytes(&self) -> &[u8; BLOCK_LEN] {
        &self.0
    }
}

impl TryFrom<&[u8]> for PrpBlock {
    type Error = Error;

    fn try_from(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; BLOCK_LEN] = bytes.try_into().map_err(|_| Error::BlockWidth(bytes.len()))?;
        Ok(PrpBlock(arr))
    }
}

/// Pads `raw` into a block: raw bytes, a 0x80 marker, zero fill, and the raw
/// length in the final byte. A 15-byte key has no room for the marker; its
/// length byte alone keeps the encoding injective.
pub fn encode_key(raw: &[u8]) -> Result<PrpBlock> {
    if raw.len() > MAX_RAW_KEY_LEN {
        return Err(Error::KeyTooLong {
            len: raw.len(),
            max: MAX_RAW_KEY_LEN,
        });
    }
    let mut block = [0u8; BLOCK_LEN];
    block[..raw.len()].copy_from_slice(raw);
    if raw.len() < MAX_RAW_KEY_LEN {
        block[raw.len()] = PAD_MARKER;
    }
    block[BLOCK_LEN - 1] = raw.len() as u8;
    Ok(PrpBlock(block))
}

pub fn decode_key(block: &PrpBlock) -> Result<Vec<u8>> {
    let b = &block.0;
    let len = b[BLOCK_LEN - 1] as usize;
    if len > MAX_RAW_KEY_LEN {
        return Err(Error::CorruptBlock);
    }
    if len < MAX_RAW_KEY_LEN {
        if b[len] != PAD_MARKER || b[len + 1..BLOCK_LEN - 1].iter().any(|&x| x != 0) {
            return Err(Error::CorruptBlock);
        }
    }
    Ok(b[..len].to_vec())
}

/// Expanded cipher for one key. Cheap to clone; safe to share across threads.
#[derive(Clone)]
pub struct Prp {
    cipher: Aes128,
}

impl Prp {
    pub fn new(key: &PrpKey) -> Self {
        Prp {
            cipher: Aes128::new(GenericArray::from_slice(&key.0)),
        }
    }

    pub fn forward(&self, block: &PrpBlock) -> PrpBlock {
        let mut b = GenericArray::clone_from_slice(&block.0);
        self.cipher.encrypt_block(&mut b);
        PrpBlock(b.into())
    }

    pub fn inverse(&self, block: &PrpBlock) -> PrpBlock {
        let mut b = GenericArray::clone_from_slice(&block.0);
        self.cipher.decrypt_block(&mut b);
        PrpBlock(b.into())
    }

    pub fn permute_key(&self, raw: &[u8]) -> Result<PrpBlock> {
        Ok(self.forward(&encode_key(raw)?))
    }

    pub fn unpermute_key(&self, block: &PrpBlock) -> Result<Vec<u8>> {
        decode_key(&self.inverse(block))
    }
}

impl fmt::Debug for Prp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Prp(<keyed>)")
    }
}

pub fn prp_forward(key: &PrpKey, block: &[u8]) -> Result<PrpBlock> {
    Ok(Prp::new(key).forward(&PrpBlock::try_from(block)?))
}

pub fn prp_inverse(key: &PrpKey, block: &[u8]) -> Result<PrpBlock> {
    Ok(Prp::new(key).inverse(&PrpBlock::try_from(block)?))
}

pub fn permute_key(key: &PrpKey, raw: &[u8]) -> Result<PrpBlock> {
    Prp::new(key).permute_key(raw)
}

pub fn unpermute_key(key: &PrpKey, block: &PrpBlock) -> Result<Vec<u8>> {
    Prp::new(key).unpermute_key(block)
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use proptest::prelude::*;
    use rand::Rng;

    use super::*;

    fn hex(s: &str) -> Vec<u8> {
        (0..s.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap())
            .collect()
    }

    // Frozen from an independent AES implementation (Python `cryptography`, ECB single block);
    // the same pair is the AES-128 example vector of FIPS-197.
    const KAT_KEY: &str = "000102030405060708090a0b0c0d0e0f";
    const KAT_PLAIN: &str = "00112233445566778899aabbccddeeff";
    const KAT_CIPHER: &str = "69c4e0d86a7b0430d8cdb78070b4c55a";
    const ZERO_KEY_ZERO_BLOCK: &str = "66e94bd4ef8a2c3b884cfa59ca342b2e";

    #[test]
    fn keygen_is_deterministic_under_seed() {
        assert_eq!(PrpKey::generate(Some(7)), PrpKey::generate(Some(7)));
        assert_ne!(PrpKey::generate(Some(7)), PrpKey::generate(Some(8)));
        assert_ne!(PrpKey::generate(None), PrpKey::generate(None));
    }

    #[test]
    fn key_hex_roundtrip_and_redacted_debug() {
        let k = PrpKey::generate(Some(1));
        assert_eq!(PrpKey::from_hex(&k.to_hex()).unwrap(), k);
        assert!(!format!("{k:?}").contains(&k.to_hex()));
        assert!(PrpKey::from_hex("abc").is_err());
        assert!(PrpKey::from_hex(&"zz".repeat(16)).is_err());
    }

    #[test]
    fn known_answer_vector() {
        let key = PrpKey::from_hex(KAT_KEY).unwrap();
        let out = prp_forward(&key, &hex(KAT_PLAIN)).unwrap();
        assert_eq!(out.0.to_vec(), hex(KAT_CIPHER));
        let back = prp_inverse(&key, &out.0).unwrap();
        assert_eq!(back.0.to_vec(), hex(KAT_PLAIN));

        let zero = PrpKey::from_bytes([0; 16]);
        assert_eq!(prp_forward(&zero, &[0; 16]).unwrap().0.to_vec(), hex(ZERO_KEY_ZERO_BLOCK));
    }

    #[test]
    fn wrong_block_width_is_rejected() {
        let key = PrpKey::generate(Some(3));
        assert!(matches!(prp_forward(&key, &[0; 15]), Err(Error::BlockWidth(15))));
        assert!(matches!(prp_inverse(&key, &[0; 17]), Err(Error::BlockWidth(17))));
    }

    #[test]
    fn inverse_of_zero_block() {
        let prp = Prp::new(&PrpKey::generate(Some(4)));
        let zero = PrpBlock([0; 16]);
        assert_eq!(prp.inverse(&prp.forward(&zero)), zero);
        assert_eq!(prp.forward(&prp.inverse(&zero)), zero);
    }

    #[test]
    fn forward_is_collision_free_on_random_inputs() {
        let prp = Prp::new(&PrpKey::generate(Some(5)));
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut inputs = HashSet::new();
        while inputs.len() < 100_000 {
            inputs.insert(rng.gen::<[u8; 16]>());
        }
        let outputs: HashSet<_> = inputs.iter().map(|b| prp.forward(&PrpBlock(*b))).collect();
        assert_eq!(outputs.len(), inputs.len());
    }

    #[test]
    fn output_bits_are_balanced() {
        let prp = Prp::new(&PrpKey::generate(Some(6)));
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let samples = 100_000;
        let mut ones = [0u32; 128];
        for _ in 0..samples {
            let out = prp.forward(&PrpBlock(rng.gen()));
            for (bit, count) in ones.iter_mut().enumerate() {
                if out.0[bit / 8] >> (bit % 8) & 1 == 1 {
                    *count += 1;
                }
            }
        }
        for (bit, &count) in ones.iter().enumerate() {
            let freq = count as f64 / samples as f64;
            assert!((freq - 0.5).abs() <= 0.01, "bit {bit} set with frequency {freq}");
        }
    }

    #[test]
    fn padding_edge_lengths() {
        assert_eq!(encode_key(b"").unwrap().0, {
            let mut b = [0u8; 16];
            b[0] = 0x80;
            b
        });
        let fifteen = [0xabu8; 15];
        let block = encode_key(&fifteen).unwrap();
        assert_eq!(block.0[15], 15);
        assert_eq!(decode_key(&block).unwrap(), fifteen);
        assert!(matches!(encode_key(&[0; 16]), Err(Error::KeyTooLong { len: 16, max: 15 })));
        // "a" and "a\x80" must not collide.
        assert_ne!(encode_key(b"a").unwrap(), encode_key(b"a\x80").unwrap());
    }

    #[test]
    fn decode_rejects_non_images() {
        let mut bad = encode_key(b"abc").unwrap();
        bad.0[3] = 0x7f;
        assert!(matches!(decode_key(&bad), Err(Error::CorruptBlock)));
        let mut bad = encode_key(b"abc").unwrap();
        bad.0[15] = 16;
        assert!(matches!(decode_key(&bad), Err(Error::CorruptBlock)));
        let mut bad = encode_key(b"abc").unwrap();
        bad.0[9] = 1;
        assert!(matches!(decode_key(&bad), Err(Error::CorruptBlock)));

        // A random block is almost never a valid image.
        let prp = Prp::new(&PrpKey::generate(Some(9)));
        assert!(prp.unpermute_key(&PrpBlock([0x5a; 16])).is_err());
    }

    #[test]
    fn permute_key_examples() {
        let k = PrpKey::generate(Some(10));
        assert_ne!(permute_key(&k, b"a").unwrap(), permute_key(&k, b"b").unwrap());
        for raw in [&b"abc"[..], b"", b"fifteen-bytes!!"] {
            assert_eq!(unpermute_key(&k, &permute_key(&k, raw).unwrap()).unwrap(), raw);
        }
        let k2 = PrpKey::generate(Some(11));
        assert_ne!(permute_key(&k, b"abc").unwrap(), permute_key(&k2, b"abc").unwrap());
        assert!(matches!(permute_key(&k, &[1; 16]), Err(Error::KeyTooLong { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn forward_inverse_roundtrip(key in any::<[u8; 16]>(), block in any::<[u8; 16]>()) {
            let prp = Prp::new(&PrpKey::from_bytes(key));
            prop_assert_eq!(prp.inverse(&prp.forward(&PrpBlock(block))), PrpBlock(block));
        }

        #[test]
        fn key_encoding_roundtrip(raw in proptest::collection::vec(any::<u8>(), 0..=15)) {
            prop_assert_eq!(decode_key(&encode_key(&raw).unwrap()).unwrap(), raw);
        }

        #[test]
        fn key_encoding_is_injective(
            a in proptest::collection::vec(any::<u8>(), 0..=15),
            b in proptest::collection::vec(any::<u8>(), 0..=15),
        ) {
            prop_assume!(a != b);
            prop_assert_ne!(encode_key(&a).unwrap(), encode_key(&b).unwrap());
        }
    }
}
