//! Binary model checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic    8 bytes  "HDCLMODL"
//! version  u32      1
//! layers   u32      number of dense layers L
//! dims     u64 × (L + 1)
//! params   f64 blocks, per layer: weights (out × in, row-major) then bias
//! ```

use std::io::{Read, Write};

use super::matrix::Matrix;
use super::mlp::{Dense, MlpModel};
use crate::error::{Error, Result};
use crate::io_util::ByteReader;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"HDCLMODL";
pub const VERSION: u32 = 1;

pub fn write_checkpoint<T: Scalar, W: Write>(model: &MlpModel<T>, mut out: W) -> Result<()> {
    let dims = model.dims();
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&((dims.len() - 1) as u32).to_le_bytes())?;
    for d in &dims {
        out.write_all(&(*d as u64).to_le_bytes())?;
    }
    for block in model.blocks() {
        for v in block {
            out.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<T: Scalar, R: Read>(input: R) -> Result<MlpModel<T>> {
    let mut r = ByteReader::new(input);
    let magic = r.bytes::<8>("magic")?;
    if &magic != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "not a model checkpoint".into(),
        });
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(r.error(format!("unsupported checkpoint version {version}")));
    }
    let layers = r.u32("layer count")? as usize;
    if layers == 0 || layers > 1024 {
        return Err(r.error(format!("implausible layer count {layers}")));
    }
    let mut dims = Vec::with_capacity(layers + 1);
    for _ in 0..=layers {
        let d = r.u64("layer width")?;
        if d == 0 || d > 1 << 24 {
            return Err(r.error(format!("implausible layer width {d}")));
        }
        dims.push(d as usize);
    }
    let mut dense = Vec::with_capacity(layers);
    for w in dims.windows(2) {
        let (inputs, outputs) = (w[0], w[1]);
        let weights = r.f64_block(inputs * outputs, "weights")?;
        let bias = r.f64_block(outputs, "bias")?;
        dense.push(Dense {
            weights: Matrix::from_vec(outputs, inputs, weights.into_iter().map(T::of).collect())?,
            bias: bias.into_iter().map(T::of).collect(),
        });
    }
    r.expect_eof()?;
    MlpModel::from_layers(dense)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = MlpModel::<f64>::standard(7, 9, 3, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 4 + 4 + 8 * 4 + 8 * model.parameter_count());
        let back: MlpModel<f64> = read_checkpoint(&buf[..]).unwrap();
        for (a, b) in model.blocks().iter().zip(back.blocks()) {
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn truncation_and_bad_magic_are_format_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = MlpModel::<f64>::standard(2, 3, 2, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        let cut = buf.len() - 3;
        match read_checkpoint::<f64, _>(&buf[..cut]) {
            Err(Error::Format { offset, .. }) => assert!(offset as usize <= cut),
            other => panic!("expected format error, got {other:?}"),
        }
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint::<f64, _>(&bad[..]), Err(Error::Format { offset: 0, .. })));
        let mut long = buf;
        long.push(0);
        assert!(read_checkpoint::<f64, _>(&long[..]).is_err());
    }
}
