//! Weight checkpoint format.
//!
//! A single ASCII header line `mlp <in> <h1> .. <out> tanh linear\n`, then every
//! parameter as a little-endian `f64`, in [`Mlp::params`] order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::mlp::Mlp;
use crate::error::{Error, Result};

pub fn header(net: &Mlp) -> String {
    let dims: Vec<String> = net.dims().iter().map(|d| d.to_string()).collect();
    format!("mlp {} tanh linear\n", dims.join(" "))
}

pub fn encode(net: &Mlp) -> Vec<u8> {
    let mut out = header(net).into_bytes();
    out.reserve(net.n_params() * 8);
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Mlp> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| Error::Checkpoint("header is not UTF-8".into()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 5 || tokens[0] != "mlp" || tokens[tokens.len() - 2..] != ["tanh", "linear"] {
        return Err(Error::Checkpoint(format!("unrecognized header `{header}`")));
    }
    let dims = tokens[1..tokens.len() - 2]
        .iter()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::Checkpoint(format!("bad layer width `{t}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let body = &bytes[newline + 1..];
    if body.len() % 8 != 0 {
        return Err(Error::Checkpoint(format!(
            "body length {} is not a multiple of 8",
            body.len()
        )));
    }
    let params: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Mlp::from_params(&dims, params).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save(net: &Mlp, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(net))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Mlp> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn header_format() {
        let net = Mlp::zeros(&[8, 32, 32, 4]).unwrap();
        assert_eq!(header(&net), "mlp 8 32 32 4 tanh linear\n");
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = Mlp::random(&[8, 32, 32, 4], &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b.mlp");
        save(&net, &path).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back, net);
        let x = [0.1, 0.2, -0.3, 0.4, 0.0, -1.0, 0.0, 1.0];
        let (a, b) = (net.forward(&x).unwrap(), back.forward(&x).unwrap());
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn truncated_body_rejected() {
        let net = Mlp::zeros(&[2, 2]).unwrap();
        let mut bytes = encode(&net);
        bytes.truncate(bytes.len() - 8);
        assert!(decode(&bytes).is_err());
        assert!(decode(b"not a checkpoint").is_err());
        assert!(decode(b"mlp 2 x tanh linear\n").is_err());
    }
}
