//! Wire format.
//!
//! ```text
//! preamble 16 | version 2 | mod_id 3 | seq 8 | flags 3 | payload_len 16 | crc 16 | payload
//! ```
//!
//! All fields are packed MSB first. The first 64 bits form the header and
//! are mapped with the header scheme; the payload is zero-padded to a whole
//! number of symbols and mapped with the payload scheme. The CRC covers
//! version through payload_len followed by the unpadded payload.

use crc::{Crc, CRC_16_IBM_3740};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modem::{build_scheme, demap_symbols, map_bits, SchemeId, SymbolBlock};

pub const PREAMBLE: u16 = 0xA5A5;
pub const VERSION: u8 = 0;
pub const HEADER_BITS: usize = 64;
pub const MAX_PAYLOAD_BITS: usize = u16::MAX as usize;

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection.
pub const CRC16: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Flags {
    pub switch_req: bool,
    pub switch_ack: bool,
    pub data: bool,
}

impl Flags {
    pub const REQ: Flags = Flags { switch_req: true, switch_ack: false, data: false };
    pub const ACK: Flags = Flags { switch_req: false, switch_ack: true, data: false };
    pub const DATA: Flags = Flags { switch_req: false, switch_ack: false, data: true };

    pub fn bits(self) -> u8 {
        (self.switch_req as u8) << 2 | (self.switch_ack as u8) << 1 | self.data as u8
    }

    pub fn from_bits(b: u8) -> Self {
        Flags {
            switch_req: b & 0b100 != 0,
            switch_ack: b & 0b010 != 0,
            data: b & 0b001 != 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub mod_id: SchemeId,
    pub seq: u8,
    pub flags: Flags,
    /// One bit per element, each 0 or 1.
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeFailure {
    HeaderFail,
    CrcFail,
}

impl DecodeFailure {
    pub fn as_str(self) -> &'static str {
        match self {
            DecodeFailure::HeaderFail => "header_fail",
            DecodeFailure::CrcFail => "crc_fail",
        }
    }
}

impl Frame {
    pub fn new(mod_id: SchemeId, seq: u8, flags: Flags, payload: Vec<u8>) -> Result<Self> {
        let f = Frame { mod_id, seq, flags, payload };
        f.validate()?;
        Ok(f)
    }

    pub fn control(flags: Flags, mod_id: SchemeId, seq: u8) -> Self {
        Frame { mod_id, seq, flags, payload: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.payload.len() > MAX_PAYLOAD_BITS {
            return Err(Error::InvalidLength {
                scheme: self.mod_id,
                bits: self.payload.len() as u64,
                reason: "payload exceeds 65535 bits",
            });
        }
        if let Some(i) = self.payload.iter().position(|&b| b > 1) {
            return Err(Error::InvalidBit(self.payload[i], i));
        }
        Ok(())
    }

    pub fn crc(&self) -> u16 {
        frame_crc(self.mod_id.wire_id(), self.seq, self.flags.bits(), &self.payload)
    }

    /// The 64 header bits, CRC included.
    pub fn header_bits(&self) -> Vec<u8> {
        let mut bits = Vec::with_capacity(HEADER_BITS);
        push_field(&mut bits, PREAMBLE as u64, 16);
        push_field(&mut bits, VERSION as u64, 2);
        push_field(&mut bits, self.mod_id.wire_id() as u64, 3);
        push_field(&mut bits, self.seq as u64, 8);
        push_field(&mut bits, self.flags.bits() as u64, 3);
        push_field(&mut bits, self.payload.len() as u64, 16);
        push_field(&mut bits, self.crc() as u64, 16);
        bits
    }
}

fn push_field(bits: &mut Vec<u8>, value: u64, width: usize) {
    bits.extend((0..width).rev().map(|i| ((value >> i) & 1) as u8));
}

fn read_field(bits: &[u8]) -> u64 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as u64)
}

/// Packs bits MSB first, zero-padding the final byte.
pub fn pack_bits(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b << (7 - i))))
        .collect()
}

fn frame_crc(mod_id: u8, seq: u8, flags: u8, payload: &[u8]) -> u16 {
    let mut bits = Vec::with_capacity(32 + payload.len());
    push_field(&mut bits, VERSION as u64, 2);
    push_field(&mut bits, mod_id as u64, 3);
    push_field(&mut bits, seq as u64, 8);
    push_field(&mut bits, flags as u64, 3);
    push_field(&mut bits, payload.len() as u64, 16);
    bits.extend_from_slice(payload);
    CRC16.checksum(&pack_bits(&bits))
}

/// Symbols the header occupies under `scheme`.
pub fn header_symbols(scheme: SchemeId) -> usize {
    HEADER_BITS.div_ceil(scheme.bits_per_symbol().max(1))
}

/// Symbols a payload of `bits` occupies under `scheme`.
pub fn payload_symbols(bits: usize, scheme: SchemeId) -> usize {
    match scheme.bits_per_symbol() {
        0 => 0,
        k => bits.div_ceil(k),
    }
}

fn map_padded(bits: &[u8], scheme: SchemeId) -> Result<SymbolBlock> {
    let k = scheme.bits_per_symbol();
    if k == 0 {
        return Err(Error::NoTxScheme);
    }
    let mut padded = bits.to_vec();
    padded.resize(bits.len().div_ceil(k) * k, 0);
    map_bits(&padded, &build_scheme(scheme))
}

/// Header symbols followed by payload symbols. The block is tagged with the
/// payload scheme, or the header scheme when there is no payload.
pub fn encode_frame(frame: &Frame, header_scheme: SchemeId, payload_scheme: SchemeId) -> Result<SymbolBlock> {
    frame.validate()?;
    let mut block = map_padded(&frame.header_bits(), header_scheme)?;
    if !frame.payload.is_empty() {
        let payload = map_padded(&frame.payload, payload_scheme)?;
        block.symbols.extend(payload.symbols);
        block.scheme_id = payload_scheme;
    }
    Ok(block)
}

/// Inverse of [`encode_frame`]. Garbage input is reported as a failure,
/// never as an error; a payload demapped with the wrong scheme shows up as
/// a CRC failure.
pub fn decode_frame(
    block: &SymbolBlock,
    header_scheme: SchemeId,
    expected_payload_scheme: SchemeId,
) -> std::result::Result<Frame, DecodeFailure> {
    if header_scheme == SchemeId::NoTx {
        return Err(DecodeFailure::HeaderFail);
    }
    let n_header = header_symbols(header_scheme);
    if block.symbols.len() < n_header {
        return Err(DecodeFailure::HeaderFail);
    }
    let header_modem = build_scheme(header_scheme);
    let bits = demap_symbols(&block.symbols[..n_header], &header_modem).map_err(|_| DecodeFailure::HeaderFail)?;
    let version = read_field(&bits[16..18]) as u8;
    let mod_id = SchemeId::from_wire_id(read_field(&bits[18..21]) as u8);
    if read_field(&bits[..16]) != PREAMBLE as u64 || version != VERSION {
        return Err(DecodeFailure::HeaderFail);
    }
    let mod_id = mod_id.ok_or(DecodeFailure::HeaderFail)?;
    let seq = read_field(&bits[21..29]) as u8;
    let flags = read_field(&bits[29..32]) as u8;
    let len = read_field(&bits[32..48]) as usize;
    let crc = read_field(&bits[48..64]) as u16;

    let mut payload = Vec::new();
    if len > 0 {
        if expected_payload_scheme == SchemeId::NoTx {
            return Err(DecodeFailure::CrcFail);
        }
        let n = payload_symbols(len, expected_payload_scheme);
        let rest = &block.symbols[n_header..];
        if rest.len() < n {
            return Err(DecodeFailure::CrcFail);
        }
        let modem = build_scheme(expected_payload_scheme);
        payload = demap_symbols(&rest[..n], &modem).map_err(|_| DecodeFailure::CrcFail)?;
        payload.truncate(len);
    }
    if frame_crc(mod_id.wire_id(), seq, flags, &payload) != crc {
        return Err(DecodeFailure::CrcFail);
    }
    Ok(Frame {
        mod_id,
        seq,
        flags: Flags::from_bits(flags),
        payload,
    })
}
