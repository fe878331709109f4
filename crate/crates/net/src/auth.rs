//! Simulated signatures: a keyed SHA-256 tag over a value's `Hash` bytes.
//!
//! Only the simulator holds the keys. Correct processes sign as themselves
//! through their handler context; the adversary can sign only as a Byzantine
//! process. A [`Signature`] cannot be constructed outside this crate, so the
//! only way to obtain a valid one for a correct signer is to observe it.

use std::fmt;
use std::hash::{Hash, Hasher};

use at2_core::ProcessId;
use sha2::{Digest, Sha256};

/// A `Hasher` that streams everything it is fed into SHA-256 and counts
/// the bytes.
pub(crate) struct ShaSink {
    sha: Sha256,
    pub(crate) bytes: usize,
}

impl ShaSink {
    pub(crate) fn new() -> Self {
        ShaSink {
            sha: Sha256::new(),
            bytes: 0,
        }
    }

    pub(crate) fn digest(self) -> [u8; 32] {
        self.sha.finalize().into()
    }
}

impl Hasher for ShaSink {
    fn finish(&self) -> u64 {
        unreachable!("use digest()")
    }

    fn write(&mut self, bytes: &[u8]) {
        self.bytes += bytes.len();
        self.sha.update(bytes);
    }
}

/// SHA-256 of a value's `Hash` encoding, plus the encoding's length.
pub(crate) fn digest_of<T: Hash + ?Sized>(value: &T) -> ([u8; 32], usize) {
    let mut sink = ShaSink::new();
    value.hash(&mut sink);
    let n = sink.bytes;
    (sink.digest(), n)
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Signature {
    signer: ProcessId,
    tag: [u8; 32],
}

impl Signature {
    pub fn signer(&self) -> ProcessId {
        self.signer
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sig({}:{})", self.signer, hex::encode(&self.tag[..4]))
    }
}

/// Per-process secret keys derived from the run seed.
#[derive(Clone)]
pub(crate) struct Keyring {
    keys: Vec<[u8; 32]>,
}

impl Keyring {
    pub(crate) fn new(seed: u64, n: usize) -> Self {
        let keys = (0..n)
            .map(|i| {
                let mut sha = Sha256::new();
                sha.update(b"key");
                sha.update(seed.to_le_bytes());
                sha.update((i as u64).to_le_bytes());
                sha.finalize().into()
            })
            .collect();
        Keyring { keys }
    }

    fn tag<T: Hash + ?Sized>(&self, signer: ProcessId, value: &T) -> [u8; 32] {
        let mut sink = ShaSink::new();
        sink.write(&self.keys[signer.index()]);
        value.hash(&mut sink);
        sink.digest()
    }

    pub(crate) fn sign<T: Hash + ?Sized>(&self, signer: ProcessId, value: &T) -> Signature {
        Signature {
            signer,
            tag: self.tag(signer, value),
        }
    }

    pub(crate) fn verify<T: Hash + ?Sized>(&self, signer: ProcessId, value: &T, sig: &Signature) -> bool {
        sig.signer == signer
            && signer.index() < self.keys.len()
            && self.tag(signer, value) == sig.tag
    }
}
