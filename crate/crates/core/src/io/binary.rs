use crate::error::{KsError, Result};
use crate::grid::{GridField, GridSpec};

pub const FIELD_MAGIC: &[u8; 8] = b"KSLABFLD";
pub const POSITIONS_MAGIC: &[u8; 8] = b"KSLABPOS";
pub const FORMAT_VERSION: u64 = 1;

const FIELD_HEADER: usize = 8 + 8 * 5;
const POSITIONS_HEADER: usize = 8 + 8 * 4;

/// Little-endian field snapshot: magic, version, `d`, `n`, `L`, `t`, then the
/// `n^d` values in row-major order.
pub fn encode_field(field: &GridField, t: f64) -> Vec<u8> {
    let s = field.spec;
    let mut out = Vec::with_capacity(FIELD_HEADER + 8 * field.values.len());
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(s.d as u64).to_le_bytes());
    out.extend_from_slice(&(s.n as u64).to_le_bytes());
    out.extend_from_slice(&s.box_length.to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    for v in &field.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], magic: &[u8; 8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..8] != magic {
            return Err(KsError::Format(format!("missing magic {:?}", String::from_utf8_lossy(magic))));
        }
        let mut r = Self { bytes, pos: 8 };
        let version = r.u64()?;
        if version != FORMAT_VERSION {
            return Err(KsError::Format(format!("unsupported format version {version}")));
        }
        Ok(r)
    }

    fn take8(&mut self) -> Result<[u8; 8]> {
        let chunk = self.bytes.get(self.pos..self.pos + 8).ok_or_else(|| KsError::Format("truncated header".into()))?;
        self.pos += 8;
        Ok(chunk.try_into().expect("slice of length 8"))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take8()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take8()?))
    }

    fn values(&self, count: usize) -> Result<Vec<f64>> {
        let body = &self.bytes[self.pos..];
        let expected = count.checked_mul(8).ok_or_else(|| KsError::Format("payload size overflows".into()))?;
        if body.len() != expected {
            return Err(KsError::Format(format!("expected {expected} payload bytes, found {}", body.len())));
        }
        Ok(body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect())
    }
}

fn dimension(d: u64) -> Result<usize> {
    if (1..=3).contains(&d) {
        Ok(d as usize)
    } else {
        Err(KsError::Format(format!("dimension must be 1, 2 or 3, got {d}")))
    }
}

/// Inverse of [`encode_field`]; returns the field and its time.
pub fn decode_field(bytes: &[u8]) -> Result<(GridField, f64)> {
    let mut r = Reader::new(bytes, FIELD_MAGIC)?;
    let d = dimension(r.u64()?)?;
    let n = r.u64()?;
    let box_length = r.f64()?;
    let t = r.f64()?;
    let n = usize::try_from(n).map_err(|_| KsError::Format("grid size does not fit in memory".into()))?;
    let len = n.checked_pow(d as u32).ok_or_else(|| KsError::Format(format!("grid size {n}^{d} overflows")))?;
    if !t.is_finite() {
        return Err(KsError::Format("snapshot time is not finite".into()));
    }
    let spec = GridSpec { d, n, box_length };
    spec.validate().map_err(|e| KsError::Format(e.to_string()))?;
    let values = r.values(len)?;
    Ok((GridField { spec, values }, t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionsSnapshot {
    pub d: usize,
    pub t: f64,
    /// `N x d`, particle-major.
    pub positions: Vec<f64>,
}

impl PositionsSnapshot {
    pub fn len(&self) -> usize {
        self.positions.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Little-endian positions: magic, version, `N`, `d`, `t`, then `N d` values.
pub fn encode_positions(positions: &[f64], d: usize, t: f64) -> Vec<u8> {
    let mut out = Vec::with_capacity(POSITIONS_HEADER + 8 * positions.len());
    out.extend_from_slice(POSITIONS_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&((positions.len() / d) as u64).to_le_bytes());
    out.extend_from_slice(&(d as u64).to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    for v in positions {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_positions(bytes: &[u8]) -> Result<PositionsSnapshot> {
    let mut r = Reader::new(bytes, POSITIONS_MAGIC)?;
    let n = r.u64()?;
    let d = dimension(r.u64()?)?;
    let t = r.f64()?;
    if !t.is_finite() {
        return Err(KsError::Format("snapshot time is not finite".into()));
    }
    let count = usize::try_from(n)
        .ok()
        .and_then(|n| n.checked_mul(d))
        .ok_or_else(|| KsError::Format(format!("particle count {n} overflows")))?;
    let positions = r.values(count)?;
    Ok(PositionsSnapshot { d, t, positions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn field_round_trip() {
        let spec = GridSpec::new(2, 4, 3.5).unwrap();
        let f = GridField::from_fn(spec, |x| x[0] - 2.0 * x[1]);
        let bytes = encode_field(&f, 0.25);
        assert_eq!(&bytes[..8], b"KSLABFLD");
        let (g, t) = decode_field(&bytes).unwrap();
        assert_eq!(g, f);
        assert_eq!(t, 0.25);
    }

    #[test]
    fn header_errors() {
        let spec = GridSpec::new(1, 4, 1.0).unwrap();
        let good = encode_field(&GridField::zeros(spec), 0.0);
        assert!(decode_field(&good[..good.len() - 1]).is_err());
        let mut bad = good.clone();
        bad[16] = 4;
        assert!(decode_field(&bad).is_err());
        let mut bad = good.clone();
        bad[8] = 2;
        assert!(decode_field(&bad).is_err());
        let mut bad = good.clone();
        bad[24..32].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(decode_field(&bad).is_err());
        let mut bad = good;
        bad[32..40].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_field(&bad).is_err());
        assert!(decode_positions(b"KSLABFLD").is_err());
    }

    proptest! {
        #[test]
        fn positions_round_trip(xs in proptest::collection::vec(-1e6f64..1e6, 0..60), d in 1usize..=3, t in 0.0f64..10.0) {
            let n = xs.len() / d;
            let xs = &xs[..n * d];
            let snap = decode_positions(&encode_positions(xs, d, t)).unwrap();
            prop_assert_eq!(snap.d, d);
            prop_assert_eq!(snap.t, t);
            prop_assert_eq!(&snap.positions[..], xs);
        }

        #[test]
        fn decoders_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..200), prefix in any::<bool>()) {
            let mut b = if prefix { b"KSLABFLD\x01\0\0\0\0\0\0\0".to_vec() } else { Vec::new() };
            b.extend(bytes);
            let _ = decode_field(&b);
            let k = b.len().min(8);
            b[..k].copy_from_slice(&POSITIONS_MAGIC[..k]);
            let _ = decode_positions(&b);
        }
    }
}
