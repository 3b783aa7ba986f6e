//! Inpainting training-mask dataset writer.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use layered3d_core::inpaint::{generate_training_mask, MaskDatasetSpec, MaskKind};
use layered3d_core::{DisparityMap, ImageBuffer};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

pub const INDEX_FILE: &str = "masks.jsonl";

/// One line of `masks.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskRecord {
    pub id: String,
    pub mask_kind: MaskKind,
    pub seed: u64,
}

/// Writes `count` samples into `out_dir`. Sample `i` reuses source
/// `i % sources.len()` and draws its mask from a generator seeded with
/// `spec.seed + i`, so any sample can be regenerated on its own.
///
/// Files per sample: `<id>_image.png` (16-bit), `<id>_disp.pfm`,
/// `<id>_mask.png` (0/255), plus one JSON line in `masks.jsonl`.
pub fn write_mask_dataset(
    sources: &[(ImageBuffer, DisparityMap)],
    count: usize,
    spec: &MaskDatasetSpec,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<MaskRecord>> {
    let out_dir = out_dir.as_ref();
    spec.validate()?;
    if sources.is_empty() && count > 0 {
        return Err(Error::Config(
            "mask dataset needs at least one image/disparity pair".into(),
        ));
    }
    for (img, d) in sources {
        img.ensure_dims(d.dims())?;
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let index_path = out_dir.join(INDEX_FILE);
    let file = File::create(&index_path).map_err(|e| Error::io(&index_path, e))?;
    let mut index = BufWriter::new(file);
    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let (img, d) = &sources[i % sources.len()];
        let seed = spec.seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mask, kind) = generate_training_mask(d, spec, &mut rng)?;
        let id = format!("{i:05}");
        io::save_png16(out_dir.join(format!("{id}_image.png")), img)?;
        io::write_pfm(out_dir.join(format!("{id}_disp.pfm")), d.plane())?;
        io::save_mask_png(out_dir.join(format!("{id}_mask.png")), &mask)?;
        let record = MaskRecord {
            id,
            mask_kind: kind,
            seed,
        };
        writeln!(index, "{}", serde_json::to_string(&record)?).map_err(|e| Error::io(&index_path, e))?;
        records.push(record);
    }
    index.flush().map_err(|e| Error::io(&index_path, e))?;
    Ok(records)
}
