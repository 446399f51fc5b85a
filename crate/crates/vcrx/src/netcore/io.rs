use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Mlp, MlpSpec, NetError};

/// Writes a model as a textual header followed by the raw little-endian
/// f64 state in declaration order (weights row-major, then bias, then
/// batch-norm scale/shift/running stats per hidden layer, then the final
/// linear). `meta` lines carry run provenance such as seed and config digest.
pub fn save_model(mlp: &Mlp, path: &Path, meta: &[(String, String)]) -> Result<(), NetError> {
    let mut w = BufWriter::new(File::create(path)?);
    let spec = mlp.spec();
    writeln!(w, "VCRXMODEL 1")?;
    writeln!(w, "in_dim {}", spec.in_dim)?;
    let hidden: Vec<String> = spec.hidden_dims.iter().map(|d| d.to_string()).collect();
    writeln!(w, "hidden {}", hidden.join(" "))?;
    writeln!(w, "out_dim {}", spec.out_dim)?;
    writeln!(w, "batchnorm {}", if spec.use_batchnorm { 1 } else { 0 })?;
    writeln!(w, "bn_batches {}", mlp.bn_batches())?;
    for (k, v) in meta {
        if k.contains(char::is_whitespace) {
            return Err(NetError::Parse(format!("meta key {k:?} contains whitespace")));
        }
        writeln!(w, "meta {k} {v}")?;
    }
    let buffers = mlp.state_buffers();
    let count: usize = buffers.iter().map(|t| t.len()).sum();
    writeln!(w, "data {count}")?;
    for t in buffers {
        for &x in &t.data {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a model written by `save_model`, returning it together with the
/// meta lines in file order.
pub fn load_model(path: &Path) -> Result<(Mlp, Vec<(String, String)>), NetError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();

    let mut read_line = |r: &mut BufReader<File>| -> Result<String, NetError> {
        line.clear();
        let n = r.read_line(&mut line)?;
        if n == 0 {
            return Err(NetError::Parse("unexpected end of header".into()));
        }
        Ok(line.trim_end_matches('\n').to_string())
    };

    let magic = read_line(&mut r)?;
    if magic != "VCRXMODEL 1" {
        return Err(NetError::Parse(format!("bad magic line {magic:?}")));
    }
    let mut in_dim = None;
    let mut hidden = None;
    let mut out_dim = None;
    let mut batchnorm = None;
    let mut bn_batches = 0u64;
    let mut meta = Vec::new();
    let count;
    loop {
        let l = read_line(&mut r)?;
        let (key, rest) = l.split_once(' ').ok_or_else(|| {
            NetError::Parse(format!("malformed header line {l:?}"))
        })?;
        match key {
            "in_dim" => in_dim = Some(parse_usize(rest)?),
            "hidden" => {
                hidden = Some(
                    rest.split_whitespace()
                        .map(parse_usize)
                        .collect::<Result<Vec<_>, _>>()?,
                )
            }
            "out_dim" => out_dim = Some(parse_usize(rest)?),
            "batchnorm" => batchnorm = Some(rest == "1"),
            "bn_batches" => {
                bn_batches = rest
                    .parse()
                    .map_err(|_| NetError::Parse(format!("bad bn_batches {rest:?}")))?
            }
            "meta" => {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                meta.push((k.to_string(), v.to_string()));
            }
            "data" => {
                count = parse_usize(rest)?;
                break;
            }
            other => return Err(NetError::Parse(format!("unknown header key {other:?}"))),
        }
    }
    let spec = MlpSpec {
        in_dim: in_dim.ok_or_else(|| NetError::Parse("missing in_dim".into()))?,
        hidden_dims: hidden.ok_or_else(|| NetError::Parse("missing hidden".into()))?,
        out_dim: out_dim.ok_or_else(|| NetError::Parse("missing out_dim".into()))?,
        use_batchnorm: batchnorm.ok_or_else(|| NetError::Parse("missing batchnorm".into()))?,
    };
    let mut mlp = Mlp::new(spec, 0).map_err(|_| NetError::Parse("bad spec in header".into()))?;
    mlp.set_bn_batches(bn_batches);
    let expect: usize = mlp.state_buffers().iter().map(|t| t.len()).sum();
    if count != expect {
        return Err(NetError::Parse(format!(
            "data count {count} does not match spec ({expect} values)"
        )));
    }
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    let mut vals = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    for t in mlp.state_buffers_mut() {
        for x in t.data.iter_mut() {
            *x = vals.next().expect("count checked");
        }
    }
    Ok((mlp, meta))
}

fn parse_usize(s: &str) -> Result<usize, NetError> {
    s.parse().map_err(|_| NetError::Parse(format!("bad integer {s:?}")))
}
