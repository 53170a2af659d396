//! Binary checkpoint of trained branches.
//!
//! All integers and floats are little-endian; weights are row-major `f64`.
//!
//! ```text
//! magic          8 bytes  "DMCCACKP"
//! version        u32      1
//! seed           u64      training seed
//! val_fraction   f64
//! test_fraction  f64
//! n_branches     u32
//! per branch:
//!   n_layers     u32
//!   per layer:
//!     in_dim     u64
//!     out_dim    u64
//!     activation u8       0 = linear, 1 = tanh
//!     dropout    f64
//!     weights    out_dim * in_dim f64
//!     bias       out_dim f64
//! ```

use std::io::{Read, Write};

use super::network::{Activation, BranchNetwork, Layer, LayerSpec};
use crate::binio::{ByteReader, ByteWriter};
use crate::error::{invalid, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"DMCCACKP";
pub const VERSION: u32 = 1;

const MAX_DIM: u64 = 1 << 24;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub seed: u64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub networks: Vec<BranchNetwork<T>>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = ByteWriter::new(out);
        w.bytes(MAGIC)?;
        w.u32(VERSION)?;
        w.u64(self.seed)?;
        w.f64(self.val_fraction)?;
        w.f64(self.test_fraction)?;
        w.u32(u32::try_from(self.networks.len()).map_err(|_| invalid("too many branches"))?)?;
        for net in &self.networks {
            w.u32(net.layers().len() as u32)?;
            for layer in net.layers() {
                w.u64(layer.spec.in_dim as u64)?;
                w.u64(layer.spec.out_dim as u64)?;
                w.u8(match layer.spec.activation {
                    Activation::Linear => 0,
                    Activation::Tanh => 1,
                })?;
                w.f64(layer.spec.dropout_rate)?;
                w.f64_slice(layer.weights.as_slice().iter().map(|v| v.as_f64()))?;
                w.f64_slice(layer.bias.iter().map(|v| v.as_f64()))?;
            }
        }
        w.flush()
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut r = ByteReader::new(input);
        if r.bytes(8)? != MAGIC {
            return Err(crate::error::Error::Parse { offset: 0, message: "not a dMCCA checkpoint (bad magic)".into() });
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.error(format!("unsupported checkpoint version {version}")));
        }
        let seed = r.u64()?;
        let val_fraction = r.f64()?;
        let test_fraction = r.f64()?;
        let n_branches = r.u32()?;
        let mut networks = Vec::with_capacity(n_branches as usize);
        for _ in 0..n_branches {
            let n_layers = r.u32()?;
            let mut layers = Vec::with_capacity(n_layers as usize);
            for _ in 0..n_layers {
                let in_dim = r.len(MAX_DIM, "in_dim")?;
                let out_dim = r.len(MAX_DIM, "out_dim")?;
                let activation = match r.u8()? {
                    0 => Activation::Linear,
                    1 => Activation::Tanh,
                    other => return Err(r.error(format!("unknown activation tag {other}"))),
                };
                let dropout_rate = r.f64()?;
                let weights = r.f64_vec(in_dim * out_dim)?.into_iter().map(T::lit).collect();
                let bias = r.f64_vec(out_dim)?.into_iter().map(T::lit).collect();
                layers.push(Layer {
                    spec: LayerSpec { in_dim, out_dim, activation, dropout_rate },
                    weights: Matrix::new(out_dim, in_dim, weights)?,
                    bias,
                });
            }
            let at = r.offset();
            networks.push(BranchNetwork::from_layers(layers).map_err(|e| crate::error::Error::Parse {
                offset: at,
                message: e.to_string(),
            })?);
        }
        r.expect_eof()?;
        Ok(Self { seed, val_fraction, test_fraction, networks })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmcca::network::mlp_specs;
    use crate::error::Error;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let specs = mlp_specs(&[6, 4, 3], Activation::Tanh, 0.2);
        let networks = (0..3).map(|_| BranchNetwork::new(&specs, &mut rng).unwrap()).collect();
        Checkpoint { seed: 42, val_fraction: 0.2, test_fraction: 0.1, networks }
    }

    #[test]
    fn round_trip_is_exact() {
        let ck = sample();
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        assert_eq!(Checkpoint::<f64>::read_from(buf.as_slice()).unwrap(), ck);
    }

    #[test]
    fn corrupt_files_name_the_offset() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        let err = Checkpoint::<f64>::read_from(&buf[..buf.len() - 3]).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::<f64>::read_from(bad.as_slice()), Err(Error::Parse { offset: 0, .. })));

        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(matches!(Checkpoint::<f64>::read_from(bad.as_slice()), Err(Error::Parse { offset: 12, .. })));

        let mut extra = buf;
        extra.push(0);
        assert!(Checkpoint::<f64>::read_from(extra.as_slice()).is_err());
    }
}
