use std::sync::Arc;

use thiserror::Error;

use crate::prototype::{Label, Prototype};

pub type NodeId = u32;

/// A prototype snapshot pushed from one node to another.
#[derive(Debug, Clone, PartialEq)]
pub struct GossipMessage {
    pub sender: NodeId,
    /// Sender's logical clock when the snapshot was taken.
    pub version: u64,
    pub prototypes: Arc<[Prototype]>,
    pub send_tick: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("truncated message: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("{0} trailing bytes after message")]
    TrailingBytes(usize),
    #[error("message carries no prototypes")]
    Empty,
    #[error("prototype {index} has dimension {found}, header says {expected}")]
    RaggedPrototype {
        index: usize,
        expected: usize,
        found: usize,
    },
}

const HEADER_LEN: usize = 4 + 8 + 4 + 4;

/// Encoded size of a message with `count` prototypes of dimension `dim`.
pub fn encoded_len(count: usize, dim: usize) -> usize {
    HEADER_LEN + count * (dim * 8 + 4 + 8)
}

impl GossipMessage {
    pub fn dimension(&self) -> usize {
        self.prototypes.first().map_or(0, |p| p.vector.len())
    }

    pub fn encoded_len(&self) -> usize {
        encoded_len(self.prototypes.len(), self.dimension())
    }

    /// Canonical little-endian encoding: sender u32, version u64,
    /// prototype count u32, dimension u32, then per prototype the features
    /// as f64, the label as i32 and the relevance as u64.
    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        if self.prototypes.is_empty() {
            return Err(CodecError::Empty);
        }
        let dim = self.dimension();
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&self.sender.to_le_bytes());
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(self.prototypes.len() as u32).to_le_bytes());
        out.extend_from_slice(&(dim as u32).to_le_bytes());
        for (index, p) in self.prototypes.iter().enumerate() {
            if p.vector.len() != dim {
                return Err(CodecError::RaggedPrototype {
                    index,
                    expected: dim,
                    found: p.vector.len(),
                });
            }
            for v in &p.vector {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&p.label.to_le_bytes());
            out.extend_from_slice(&p.relevance.to_le_bytes());
        }
        Ok(out)
    }

    /// Decodes the canonical encoding. Prototype ids are the positions in
    /// the message; creation ticks and the send tick are not on the wire and
    /// come back as zero.
    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader { bytes, pos: 0 };
        let sender = u32::from_le_bytes(r.take()?);
        let version = u64::from_le_bytes(r.take()?);
        let count = u32::from_le_bytes(r.take()?) as usize;
        let dim = u32::from_le_bytes(r.take()?) as usize;
        if count == 0 {
            return Err(CodecError::Empty);
        }
        let needed = encoded_len(count, dim);
        if bytes.len() < needed {
            return Err(CodecError::Truncated {
                needed,
                available: bytes.len(),
            });
        }
        let mut prototypes = Vec::with_capacity(count);
        for id in 0..count {
            let vector = (0..dim)
                .map(|_| r.take().map(f64::from_le_bytes))
                .collect::<Result<Vec<_>, _>>()?;
            let label = Label::from_le_bytes(r.take()?);
            let relevance = u64::from_le_bytes(r.take()?);
            prototypes.push(Prototype {
                id: id as u64,
                vector,
                label,
                relevance,
                creation_tick: 0.0,
            });
        }
        if r.pos != bytes.len() {
            return Err(CodecError::TrailingBytes(bytes.len() - r.pos));
        }
        Ok(Self {
            sender,
            version,
            prototypes: prototypes.into(),
            send_tick: 0.0,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        let end = self.pos + N;
        let chunk = self.bytes.get(self.pos..end).ok_or(CodecError::Truncated {
            needed: end,
            available: self.bytes.len(),
        })?;
        self.pos = end;
        Ok(chunk.try_into().expect("slice of length N"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg() -> GossipMessage {
        let protos: Vec<Prototype> = (0..3)
            .map(|i| Prototype {
                id: i,
                vector: vec![i as f64, -0.5, 1e-3],
                label: i as i32 - 1,
                relevance: 10 * i,
                creation_tick: 0.0,
            })
            .collect();
        GossipMessage {
            sender: 4,
            version: 77,
            prototypes: protos.into(),
            send_tick: 0.0,
        }
    }

    #[test]
    fn layout_is_fixed() {
        let m = msg();
        let bytes = m.encode().unwrap();
        assert_eq!(bytes.len(), 20 + 3 * (3 * 8 + 12));
        assert_eq!(bytes.len(), m.encoded_len());
        assert_eq!(&bytes[0..4], &4u32.to_le_bytes());
        assert_eq!(&bytes[4..12], &77u64.to_le_bytes());
        assert_eq!(&bytes[12..16], &3u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &3u32.to_le_bytes());
        // first prototype: features, then label, then relevance
        assert_eq!(&bytes[20..28], &0f64.to_le_bytes());
        assert_eq!(&bytes[44..48], &(-1i32).to_le_bytes());
        assert_eq!(&bytes[48..56], &0u64.to_le_bytes());
    }

    #[test]
    fn decode_inverts_encode() {
        let m = msg();
        assert_eq!(GossipMessage::decode(&m.encode().unwrap()).unwrap(), m);
    }

    #[test]
    fn decode_rejects_truncation_and_trailing() {
        let bytes = msg().encode().unwrap();
        assert!(matches!(
            GossipMessage::decode(&bytes[..bytes.len() - 1]),
            Err(CodecError::Truncated { .. })
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert_eq!(
            GossipMessage::decode(&long).unwrap_err(),
            CodecError::TrailingBytes(1)
        );
    }

    #[test]
    fn empty_message_rejected() {
        let m = GossipMessage {
            prototypes: Vec::new().into(),
            ..msg()
        };
        assert_eq!(m.encode().unwrap_err(), CodecError::Empty);
    }
}
