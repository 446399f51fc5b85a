//! Dataset container: little-endian header, then raw f64 blocks.
//!
//! Layout: magic "VCRXDATA", u32 version, u64 counts (rows, x width,
//! y width, z width), u64 seed, the 8-byte config digest, then the x, y,
//! and z payload blocks row-major. A z width of 0 means no eavesdropper
//! stream and an empty z block.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, RngCore};

use super::config::ConfigDigest;
use super::CliError;
use crate::sources::{SampleBatch, Source};

const MAGIC: &[u8; 8] = b"VCRXDATA";
const VERSION: u32 = 1;

/// An in-memory dataset together with the provenance stamped in its file.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub z: Option<Array2<f64>>,
    pub seed: u64,
    pub digest: ConfigDigest,
}

impl Dataset {
    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn z_dim(&self) -> usize {
        self.z.as_ref().map_or(0, |z| z.ncols())
    }
}

fn write_block(w: &mut impl Write, block: &Array2<f64>) -> Result<(), CliError> {
    for &v in block.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Writes a sampled batch with its provenance. Identical (batch, seed,
/// digest) inputs produce byte-identical files.
pub fn write_dataset(
    path: &Path,
    batch: &SampleBatch,
    seed: u64,
    digest: ConfigDigest,
) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let dz = batch.z.as_ref().map_or(0, |z| z.ncols());
    for v in [
        batch.x.nrows() as u64,
        batch.x.ncols() as u64,
        batch.y.ncols() as u64,
        dz as u64,
        seed,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&digest.0)?;
    write_block(&mut w, &batch.x)?;
    write_block(&mut w, &batch.y)?;
    if let Some(z) = &batch.z {
        write_block(&mut w, z)?;
    }
    w.flush()?;
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64, CliError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_block(r: &mut impl Read, rows: usize, cols: usize) -> Result<Array2<f64>, CliError> {
    let mut bytes = vec![0u8; rows * cols * 8];
    r.read_exact(&mut bytes)?;
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| CliError::Data(format!("block shape: {e}")))
}

/// Reads a dataset file, validating the header and exact payload length.
pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let mut r = BufReader::new(
        File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
    );
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CliError::Data(format!(
            "{}: not a dataset file (bad magic)",
            path.display()
        )));
    }
    let mut ver = [0u8; 4];
    r.read_exact(&mut ver)?;
    let version = u32::from_le_bytes(ver);
    if version != VERSION {
        return Err(CliError::Data(format!(
            "unsupported dataset version {version}, expected {VERSION}"
        )));
    }
    let rows = read_u64(&mut r)? as usize;
    let dx = read_u64(&mut r)? as usize;
    let dy = read_u64(&mut r)? as usize;
    let dz = read_u64(&mut r)? as usize;
    let seed = read_u64(&mut r)?;
    let mut digest = [0u8; 8];
    r.read_exact(&mut digest)?;
    if rows == 0 || dx == 0 || dy == 0 {
        return Err(CliError::Data(format!(
            "degenerate dataset header: rows {rows}, x {dx}, y {dy}"
        )));
    }
    let x = read_block(&mut r, rows, dx)?;
    let y = read_block(&mut r, rows, dy)?;
    let z = if dz > 0 {
        Some(read_block(&mut r, rows, dz)?)
    } else {
        None
    };
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(CliError::Data(format!(
            "{}: trailing bytes after payload",
            path.display()
        )));
    }
    Ok(Dataset {
        x,
        y,
        z,
        seed,
        digest: ConfigDigest(digest),
    })
}

/// Replays a dataset as a source by drawing rows uniformly with
/// replacement. Training consumes far more samples than a file holds, so
/// batches bootstrap from the stored pool.
pub struct DatasetSource {
    data: Dataset,
}

impl DatasetSource {
    pub fn new(data: Dataset) -> Self {
        Self { data }
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }
}

impl Source for DatasetSource {
    fn x_dim(&self) -> usize {
        self.data.x.ncols()
    }

    fn y_dim(&self) -> usize {
        self.data.y.ncols()
    }

    fn z_dim(&self) -> usize {
        self.data.z_dim()
    }

    fn sample(&self, batch: usize, rng: &mut dyn RngCore) -> SampleBatch {
        let rows = self.data.rows();
        let mut x = Array2::zeros((batch, self.x_dim()));
        let mut y = Array2::zeros((batch, self.y_dim()));
        let mut z = self.data.z.as_ref().map(|_| Array2::zeros((batch, self.z_dim())));
        for i in 0..batch {
            let r = rng.gen_range(0..rows);
            x.row_mut(i).assign(&self.data.x.row(r));
            y.row_mut(i).assign(&self.data.y.row(r));
            if let (Some(z), Some(zd)) = (z.as_mut(), self.data.z.as_ref()) {
                z.row_mut(i).assign(&zd.row(r));
            }
        }
        SampleBatch { x, y, z }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn demo_batch(with_z: bool) -> SampleBatch {
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let y = array![[0.5, 0.25], [0.125, 0.0625], [-1.0, -2.0]];
        let z = with_z.then(|| array![[9.0], [8.0], [7.0]]);
        SampleBatch { x, y, z }
    }

    fn demo_digest() -> ConfigDigest {
        ConfigDigest(*b"\x01\x23\x45\x67\x89\xab\xcd\xef")
    }

    #[test]
    fn round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let batch = demo_batch(true);
        write_dataset(&path, &batch, 42, demo_digest()).unwrap();
        let ds = read_dataset(&path).unwrap();
        assert_eq!(ds.x, batch.x);
        assert_eq!(ds.y, batch.y);
        assert_eq!(ds.z, batch.z);
        assert_eq!(ds.seed, 42);
        assert_eq!(ds.digest, demo_digest());
    }

    #[test]
    fn round_trip_without_z() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        write_dataset(&path, &demo_batch(false), 7, demo_digest()).unwrap();
        let ds = read_dataset(&path).unwrap();
        assert!(ds.z.is_none());
        assert_eq!(ds.z_dim(), 0);
        assert_eq!(ds.rows(), 3);
    }

    #[test]
    fn writes_are_byte_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.bin"), dir.path().join("b.bin"));
        write_dataset(&p1, &demo_batch(true), 42, demo_digest()).unwrap();
        write_dataset(&p2, &demo_batch(true), 42, demo_digest()).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        write_dataset(&path, &demo_batch(true), 42, demo_digest()).unwrap();
        let good = std::fs::read(&path).unwrap();

        let bad_magic = {
            let mut b = good.clone();
            b[0] = b'X';
            b
        };
        let truncated = good[..good.len() - 3].to_vec();
        let trailing = {
            let mut b = good.clone();
            b.push(0);
            b
        };
        for (name, bytes) in [
            ("magic", bad_magic),
            ("truncated", truncated),
            ("trailing", trailing),
        ] {
            let p = dir.path().join(format!("{name}.bin"));
            std::fs::write(&p, bytes).unwrap();
            assert!(read_dataset(&p).is_err(), "{name} accepted");
        }
    }

    #[test]
    fn source_replays_pool_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        write_dataset(&path, &demo_batch(true), 1, demo_digest()).unwrap();
        let src = DatasetSource::new(read_dataset(&path).unwrap());
        assert_eq!((src.x_dim(), src.y_dim(), src.z_dim()), (2, 2, 1));

        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let batch = src.sample(64, &mut rng);
        assert_eq!(batch.rows(), 64);
        let pool = demo_batch(true);
        for i in 0..64 {
            let row = batch.x.row(i);
            let j = (0..3)
                .find(|&j| pool.x.row(j) == row)
                .expect("sampled row comes from the pool");
            assert_eq!(batch.y.row(i), pool.y.row(j));
            assert_eq!(batch.z.as_ref().unwrap().row(i), pool.z.as_ref().unwrap().row(j));
        }
    }

    #[test]
    fn source_sampling_is_seed_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        write_dataset(&path, &demo_batch(false), 1, demo_digest()).unwrap();
        let src = DatasetSource::new(read_dataset(&path).unwrap());
        let a = src.sample(32, &mut ChaCha12Rng::seed_from_u64(5));
        let b = src.sample(32, &mut ChaCha12Rng::seed_from_u64(5));
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
    }
}
