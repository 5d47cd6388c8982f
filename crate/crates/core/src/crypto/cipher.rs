use aes::cipher::generic_array::GenericArray;
use aes::cipher::{BlockDecrypt, BlockEncrypt, KeyInit, KeyIvInit, StreamCipher};
use aes::{Aes128, Aes256};

use super::{count, CryptoError, IgePair, Key16, Key32};

pub const BLOCK_LEN: usize = 16;

type Aes128Ctr = ctr::Ctr128BE<Aes128>;

fn check_blocks(len: usize) -> Result<(), CryptoError> {
    if len.is_multiple_of(BLOCK_LEN) {
        Ok(())
    } else {
        Err(CryptoError::NotBlockMultiple(len))
    }
}

fn xor_in_place(dst: &mut [u8; 16], src: &[u8; 16]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

/// AES-256-IGE: `y_i = E(x_i ^ y_{i-1}) ^ x_{i-1}`.
pub fn ige_encrypt(key: &Key32, iv: &IgePair, plaintext: &[u8]) -> Result<Vec<u8>, CryptoError> {
    check_blocks(plaintext.len())?;
    let cipher = Aes256::new(GenericArray::from_slice(key.as_bytes()));
    let mut prev_c = iv.y0;
    let mut prev_p = iv.x0;
    let mut out = Vec::with_capacity(plaintext.len());

    for chunk in plaintext.chunks_exact(BLOCK_LEN) {
        let p: [u8; 16] = chunk.try_into().expect("exact chunk");
        let mut block = p;
        xor_in_place(&mut block, &prev_c);
        cipher.encrypt_block(GenericArray::from_mut_slice(&mut block));
        xor_in_place(&mut block, &prev_p);
        out.extend_from_slice(&block);
        prev_c = block;
        prev_p = p;
    }
    count(|c| c.block_encryptions += (plaintext.len() / BLOCK_LEN) as u64);
    Ok(out)
}

/// Inverse of [`ige_encrypt`]: `x_i = D(y_i ^ x_{i-1}) ^ y_{i-1}`.
pub fn ige_decrypt(key: &Key32, iv: &IgePair, ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
    check_blocks(ciphertext.len())?;
    let cipher = Aes256::new(GenericArray::from_slice(key.as_bytes()));
    let mut prev_c = iv.y0;
    let mut prev_p = iv.x0;
    let mut out = Vec::with_capacity(ciphertext.len());

    for chunk in ciphertext.chunks_exact(BLOCK_LEN) {
        let c: [u8; 16] = chunk.try_into().expect("exact chunk");
        let mut block = c;
        xor_in_place(&mut block, &prev_p);
        cipher.decrypt_block(GenericArray::from_mut_slice(&mut block));
        xor_in_place(&mut block, &prev_c);
        out.extend_from_slice(&block);
        prev_c = c;
        prev_p = block;
    }
    count(|c| c.block_decryptions += (ciphertext.len() / BLOCK_LEN) as u64);
    Ok(out)
}

/// AES-128-CTR with `nonce` as the initial big-endian counter block.
/// Length-preserving and its own inverse.
pub fn ctr_xcrypt(key: &Key16, nonce: &[u8; 16], data: &[u8]) -> Vec<u8> {
    let mut out = data.to_vec();
    let mut cipher = Aes128Ctr::new(
        GenericArray::from_slice(key.as_bytes()),
        GenericArray::from_slice(nonce),
    );
    cipher.apply_keystream(&mut out);
    count(|c| c.block_encryptions += data.len().div_ceil(BLOCK_LEN) as u64);
    out
}
