//! Infected-file image format and the two-stage XOR / XOR-ROL transform.
//!
//! An infected file is laid out as
//! `deco_head ‖ malicious_core ‖ clean_encrypted ‖ deco_tail`; the decoration
//! segments are regenerated from each variant's decoration seed, the core is
//! the lineage-wide signature, and the victim's original bytes sit in the
//! middle, encrypted per octet as `c = ROL(b ^ k1, r) ^ k2`.

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::rng_from_seed;
use crate::variant::VirusVariant;

pub const DECORATION_LEN: usize = 32;
pub const TRANSFER_ID_LEN: usize = 64;

const DECO_HEAD_SALT: u64 = 0x4445_434f_4845_4144;
const DECO_TAIL_SALT: u64 = 0x4445_434f_5441_494c;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("transfer id must be exactly {TRANSFER_ID_LEN} characters, got {0}")]
    TransferIdLength(usize),
    #[error("payload image truncated at offset {0}")]
    Truncated(usize),
    #[error("payload name is not valid UTF-8")]
    BadName,
    #[error("payload image has {0} trailing octets")]
    Trailing(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodecKey {
    pub k1: u8,
    r: u8,
    pub k2: u8,
}

impl CodecKey {
    /// `r` is reduced modulo 8.
    pub fn new(k1: u8, r: u8, k2: u8) -> Self {
        CodecKey { k1, r: r % 8, k2 }
    }

    pub fn rotation(&self) -> u32 {
        u32::from(self.r)
    }

    pub fn from_seed(seed: u64) -> Self {
        CodecKey::new(seed as u8, ((seed >> 8) % 8) as u8, (seed >> 16) as u8)
    }

    #[inline]
    pub fn encrypt_octet(&self, b: u8) -> u8 {
        (b ^ self.k1).rotate_left(self.rotation()) ^ self.k2
    }

    #[inline]
    pub fn decrypt_octet(&self, c: u8) -> u8 {
        (c ^ self.k2).rotate_right(self.rotation()) ^ self.k1
    }
}

pub fn derive_key(variant: &VirusVariant) -> CodecKey {
    CodecKey::from_seed(variant.decoration_seed)
}

pub fn encrypt(content: &[u8], key: CodecKey) -> Vec<u8> {
    content.iter().map(|&b| key.encrypt_octet(b)).collect()
}

pub fn decrypt(cipher: &[u8], key: CodecKey) -> Vec<u8> {
    cipher.iter().map(|&c| key.decrypt_octet(c)).collect()
}

/// Shannon entropy in bits per octet. Diagnostic only.
pub fn byte_entropy(data: &[u8]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let mut counts = [0usize; 256];
    for &b in data {
        counts[b as usize] += 1;
    }
    let n = data.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayloadLayout {
    pub deco_head: Vec<u8>,
    pub malicious_core: Vec<u8>,
    pub clean_encrypted: Vec<u8>,
    pub deco_tail: Vec<u8>,
    pub original_name: String,
    pub marked_executable: bool,
}

fn decoration(seed: u64, salt: u64) -> Vec<u8> {
    let mut buf = vec![0u8; DECORATION_LEN];
    rng_from_seed(seed ^ salt).fill_bytes(&mut buf);
    buf
}

/// Embeds `clean` into a fresh infected image owned by `variant`.
pub fn wrap(clean: &[u8], name: &str, variant: &VirusVariant) -> PayloadLayout {
    PayloadLayout {
        deco_head: decoration(variant.decoration_seed, DECO_HEAD_SALT),
        malicious_core: variant.core_signature.to_vec(),
        clean_encrypted: encrypt(clean, derive_key(variant)),
        deco_tail: decoration(variant.decoration_seed, DECO_TAIL_SALT),
        original_name: name.to_owned(),
        marked_executable: true,
    }
}

/// Recovers the embedded clean content. A wrong variant yields garbage, not
/// an error: the transform carries no integrity check.
pub fn unwrap(layout: &PayloadLayout, variant: &VirusVariant) -> Vec<u8> {
    decrypt(&layout.clean_encrypted, derive_key(variant))
}

impl PayloadLayout {
    /// Length-prefixed encoding (u32 big-endian lengths):
    /// head, core, encrypted body, tail, UTF-8 name, then one flag octet.
    pub fn to_bytes(&self) -> Vec<u8> {
        let segments: [&[u8]; 5] = [
            &self.deco_head,
            &self.malicious_core,
            &self.clean_encrypted,
            &self.deco_tail,
            self.original_name.as_bytes(),
        ];
        let total: usize = segments.iter().map(|s| 4 + s.len()).sum::<usize>() + 1;
        let mut out = Vec::with_capacity(total);
        for s in segments {
            out.extend_from_slice(&(s.len() as u32).to_be_bytes());
            out.extend_from_slice(s);
        }
        out.push(u8::from(self.marked_executable));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut pos = 0usize;
        let take = |pos: &mut usize| -> Result<Vec<u8>, CodecError> {
            let len_end = *pos + 4;
            let len_bytes = bytes.get(*pos..len_end).ok_or(CodecError::Truncated(*pos))?;
            let len = u32::from_be_bytes(len_bytes.try_into().expect("4 octets")) as usize;
            let seg = bytes
                .get(len_end..len_end + len)
                .ok_or(CodecError::Truncated(len_end))?;
            *pos = len_end + len;
            Ok(seg.to_vec())
        };
        let deco_head = take(&mut pos)?;
        let malicious_core = take(&mut pos)?;
        let clean_encrypted = take(&mut pos)?;
        let deco_tail = take(&mut pos)?;
        let name = take(&mut pos)?;
        let flag = *bytes.get(pos).ok_or(CodecError::Truncated(pos))?;
        pos += 1;
        if pos != bytes.len() {
            return Err(CodecError::Trailing(bytes.len() - pos));
        }
        Ok(PayloadLayout {
            deco_head,
            malicious_core,
            clean_encrypted,
            deco_tail,
            original_name: String::from_utf8(name).map_err(|_| CodecError::BadName)?,
            marked_executable: flag != 0,
        })
    }
}

/// Payment identifier typed into the ransom screen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferId(String);

impl TransferId {
    pub fn new(id: impl Into<String>) -> Result<Self, CodecError> {
        let id = id.into();
        let n = id.chars().count();
        if n != TRANSFER_ID_LEN {
            return Err(CodecError::TransferIdLength(n));
        }
        Ok(TransferId(id))
    }

    pub fn zeros() -> Self {
        TransferId("0".repeat(TRANSFER_ID_LEN))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// True iff the id consists of 64 ASCII zero digits, which the ransom screen
/// accepts as proof of payment.
pub fn exploit_check(id: &TransferId) -> bool {
    id.0.chars().all(|c| c == '0')
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::variant::LineageTree;
    use proptest::prelude::*;
    use rand::Rng;

    /// Independent oracle: tables built from explicit bit manipulation.
    fn table_oracle(k1: u8, r: u32, k2: u8) -> [u8; 256] {
        let mut t = [0u8; 256];
        for (b, slot) in t.iter_mut().enumerate() {
            let x = (b as u8) ^ k1;
            let rotated = if r == 0 { x } else { (x << r) | (x >> (8 - r)) };
            *slot = rotated ^ k2;
        }
        t
    }

    #[test]
    fn key_extraction() {
        assert_eq!(CodecKey::from_seed(0), CodecKey::new(0, 0, 0));
        assert_eq!(CodecKey::from_seed(0x00A5_0153), CodecKey::new(0x53, 1, 0xA5));
    }

    #[test]
    fn worked_octet_example() {
        let key = CodecKey::new(0x0F, 1, 0xA5);
        assert_eq!(encrypt(&[0x53], key), vec![0x1D]);
        assert_eq!(decrypt(&[0x1D], key), vec![0x53]);
    }

    #[test]
    fn encrypt_matches_table_oracle_for_all_octets() {
        let mut rng = rng_from_seed(4);
        for _ in 0..64 {
            let key = CodecKey::new(rng.random(), rng.random_range(0..8), rng.random());
            let table = table_oracle(key.k1, key.rotation(), key.k2);
            let all: Vec<u8> = (0..=255u8).collect();
            let enc = encrypt(&all, key);
            for b in 0..256 {
                assert_eq!(enc[b], table[b]);
            }
        }
    }

    #[test]
    fn identity_key_and_empty_input() {
        let key = CodecKey::new(0, 0, 0);
        let data = b"plain text".to_vec();
        assert_eq!(encrypt(&data, key), data);
        assert_eq!(decrypt(&data, key), data);
        assert!(encrypt(&[], CodecKey::new(1, 2, 3)).is_empty());
    }

    #[test]
    fn wrap_unwrap_and_siblings() {
        let mut t = LineageTree::spawn_root(9);
        let mut rng = rng_from_seed(9);
        let root = t.root().id;
        let a = t.mutate(root, 0, &mut rng).unwrap();
        let b = t.mutate(root, 0, &mut rng).unwrap();
        let clean: Vec<u8> = (0..200u32).map(|i| (i * 7) as u8).collect();
        let la = wrap(&clean, "report.doc", &a);
        assert_eq!(la, wrap(&clean, "report.doc", &a));
        assert!(la.marked_executable);
        assert_eq!(la.original_name, "report.doc");
        assert_eq!(la.deco_head.len(), DECORATION_LEN);
        assert_eq!(unwrap(&la, &a), clean);
        let lb = wrap(&clean, "report.doc", &b);
        assert_ne!(la.deco_head, lb.deco_head);
        assert_ne!(la.to_bytes(), lb.to_bytes());
        let ka = derive_key(&a);
        let kb = derive_key(&b);
        if ka != kb {
            assert_ne!(unwrap(&la, &b), clean);
        }
    }

    #[test]
    fn empty_clean_content() {
        let t = LineageTree::spawn_root(2);
        let l = wrap(&[], "x", t.root());
        assert!(l.clean_encrypted.is_empty());
        assert!(l.marked_executable);
        assert!(unwrap(&l, t.root()).is_empty());
    }

    #[test]
    fn transfer_id_rules() {
        assert!(exploit_check(&TransferId::new("0".repeat(64)).unwrap()));
        assert!(exploit_check(&TransferId::zeros()));
        let almost = format!("{}1", "0".repeat(63));
        assert!(!exploit_check(&TransferId::new(almost).unwrap()));
        assert!(!exploit_check(&TransferId::new("O".repeat(64)).unwrap()));
        assert_eq!(
            TransferId::new("0".repeat(63)),
            Err(CodecError::TransferIdLength(63))
        );
    }

    #[test]
    fn truncated_images_are_rejected() {
        let t = LineageTree::spawn_root(2);
        let bytes = wrap(b"abc", "n", t.root()).to_bytes();
        for cut in [0, 3, 10, bytes.len() - 1] {
            assert!(PayloadLayout::from_bytes(&bytes[..cut]).is_err());
        }
        let mut long = bytes.clone();
        long.push(0);
        assert_eq!(PayloadLayout::from_bytes(&long), Err(CodecError::Trailing(1)));
    }

    #[test]
    fn entropy_bounds() {
        assert_eq!(byte_entropy(&[]), 0.0);
        assert_eq!(byte_entropy(&[7; 100]), 0.0);
        let all: Vec<u8> = (0..=255u8).collect();
        assert!((byte_entropy(&all) - 8.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn round_trip(content in proptest::collection::vec(any::<u8>(), 0..65_536),
                      k1 in any::<u8>(), r in 0u8..8, k2 in any::<u8>()) {
            let key = CodecKey::new(k1, r, k2);
            prop_assert_eq!(decrypt(&encrypt(&content, key), key), content);
        }

        #[test]
        fn serialized_layout_parses_back(
            head in proptest::collection::vec(any::<u8>(), 0..64),
            core in proptest::collection::vec(any::<u8>(), 0..32),
            body in proptest::collection::vec(any::<u8>(), 0..512),
            tail in proptest::collection::vec(any::<u8>(), 0..64),
            name in "[a-z0-9._]{0,20}",
            exe in any::<bool>(),
        ) {
            let l = PayloadLayout {
                deco_head: head, malicious_core: core, clean_encrypted: body,
                deco_tail: tail, original_name: name, marked_executable: exe,
            };
            prop_assert_eq!(PayloadLayout::from_bytes(&l.to_bytes()).unwrap(), l);
        }
    }
}
