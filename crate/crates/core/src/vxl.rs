//! `.vxl` container: the packed voxel model plus optional derived data.
//!
//! Layout, all little-endian: `VXL1`, grid dims (3 x u32), log2 bins (u8),
//! record width (u8), segment count (u64), one 5-byte header per voxel,
//! the packed records, a 256-entry RGBA f32 transfer table, then tagged
//! chunks (`[u8; 4]` tag, u64 length, payload) until the end of the file.
//! Unknown chunks are skipped.

use std::io::Write;
use std::path::Path;

use crate::bytes::Reader;
use crate::error::{Error, Result};
use crate::lod::{DensityOctree, FacePoint, Field3, RepLevel, RepLine, RepLineField};
use crate::model::{SegmentOrigin, TransferTable, VoxelModel};
use crate::raycast::RenderScene;
use crate::scene::GridSpec;
use crate::voxelizer::{pack_segment_into, record_width, unpack_segment};

pub const MAGIC: &[u8; 4] = b"VXL1";
const TAG_ORIGINS: &[u8; 4] = b"CIDS";
const TAG_DENSITY: &[u8; 4] = b"DENS";
const TAG_REPLINES: &[u8; 4] = b"REPL";
const TAG_AO: &[u8; 4] = b"AOFD";

#[derive(Debug, Clone)]
pub struct VxlFile {
    pub model: VoxelModel,
    pub octree: Option<DensityOctree>,
    pub reps: Option<RepLineField>,
    pub ao: Option<Field3>,
}

impl VxlFile {
    pub fn new(model: VoxelModel) -> Self {
        Self { model, octree: None, reps: None, ao: None }
    }

    pub fn into_scene(self) -> RenderScene {
        let mut scene = RenderScene::new(self.model).with_lod(self.octree, self.reps);
        scene.set_ao_field(self.ao);
        scene
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_field(out: &mut Vec<u8>, f: &Field3) {
    for d in f.dims {
        put_u32(out, d);
    }
    for v in &f.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn chunk(out: &mut Vec<u8>, tag: &[u8; 4], payload: &[u8]) {
    out.extend_from_slice(tag);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
}

pub fn encode_vxl(file: &VxlFile) -> Result<Vec<u8>> {
    let m = &file.model;
    let spec = m.spec();
    let width = record_width(spec.bins);
    let mut out = Vec::with_capacity(m.memory_bytes() as usize + 64);
    out.extend_from_slice(MAGIC);
    for d in spec.dims {
        put_u32(&mut out, d);
    }
    out.push(spec.log2_bins() as u8);
    out.push(width as u8);
    out.extend_from_slice(&(m.segment_count() as u64).to_le_bytes());
    for (&c, &o) in m.counts().iter().zip(m.offsets()) {
        out.push(c);
        put_u32(&mut out, o);
    }
    let start = out.len();
    out.resize(start + width * m.segment_count(), 0);
    for (s, rec) in m.segments().iter().zip(out[start..].chunks_exact_mut(width)) {
        pack_segment_into(s, spec.bins, rec)?;
    }
    for e in m.transfer().entries() {
        for v in e {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    if !m.origins().is_empty() {
        let mut p = Vec::with_capacity(8 * m.origins().len());
        for o in m.origins() {
            put_u32(&mut p, o.curve);
            put_u32(&mut p, o.seq);
        }
        chunk(&mut out, TAG_ORIGINS, &p);
    }
    if let Some(t) = &file.octree {
        let mut p = Vec::new();
        put_u32(&mut p, t.levels.len() as u32);
        for f in &t.levels {
            put_field(&mut p, f);
        }
        chunk(&mut out, TAG_DENSITY, &p);
    }
    if let Some(r) = &file.reps {
        let mut p = Vec::new();
        put_u32(&mut p, r.bins);
        put_u32(&mut p, r.levels.len() as u32);
        for lv in &r.levels {
            put_u32(&mut p, lv.level);
            for d in lv.dims {
                put_u32(&mut p, d);
            }
            p.extend_from_slice(&(lv.count() as u64).to_le_bytes());
            for (i, l) in lv.lines.iter().enumerate() {
                if let Some(l) = l {
                    p.extend_from_slice(&(i as u64).to_le_bytes());
                    p.push(l.start.face);
                    put_u32(&mut p, l.start.bin);
                    p.push(l.end.face);
                    put_u32(&mut p, l.end.bin);
                    p.extend_from_slice(&l.weight.to_le_bytes());
                }
            }
        }
        chunk(&mut out, TAG_REPLINES, &p);
    }
    if let Some(f) = &file.ao {
        let mut p = Vec::new();
        put_field(&mut p, f);
        chunk(&mut out, TAG_AO, &p);
    }
    Ok(out)
}

pub fn write_vxl(file: &VxlFile, w: &mut impl Write) -> Result<()> {
    w.write_all(&encode_vxl(file)?)?;
    Ok(())
}

pub fn save_vxl(file: &VxlFile, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_vxl(file)?)?;
    Ok(())
}

pub fn load_vxl(path: impl AsRef<Path>) -> Result<VxlFile> {
    read_vxl(&std::fs::read(path)?)
}

fn read_dims(r: &mut Reader, what: &str) -> Result<[u32; 3]> {
    Ok([r.u32(what)?, r.u32(what)?, r.u32(what)?])
}

fn read_field(r: &mut Reader, what: &str) -> Result<Field3> {
    let dims = read_dims(r, what)?;
    let n = dims.iter().map(|&d| d as u64).product::<u64>();
    if n * 4 > r.remaining() as u64 {
        return Err(Error::Truncated(format!("{what}: {n} values do not fit")));
    }
    let values = (0..n).map(|_| r.f32(what)).collect::<Result<_>>()?;
    Ok(Field3 { dims, values })
}

pub fn read_vxl(bytes: &[u8]) -> Result<VxlFile> {
    let mut r = Reader::new(bytes);
    let magic = r.array::<4>("magic")?;
    if &magic != MAGIC {
        return Err(Error::BadMagic { expected: "VXL1", found: magic });
    }
    let dims = read_dims(&mut r, "grid dims")?;
    let log2 = r.u8("bins")?;
    if log2 > 8 {
        return Err(Error::Format(format!("log2 bins {log2} out of range")));
    }
    let spec = GridSpec::new(dims, 1 << log2)?;
    let width = r.u8("record width")? as usize;
    if width != record_width(spec.bins) {
        return Err(Error::Format(format!("record width {width} does not match {} bins", spec.bins)));
    }
    let count = r.u64("segment count")?;
    let voxels = spec.voxel_count();
    if (voxels as u64) * 5 + count * width as u64 > r.remaining() as u64 {
        return Err(Error::Truncated(format!("{voxels} headers and {count} segments do not fit")));
    }
    let mut counts = Vec::with_capacity(voxels);
    let mut offsets = Vec::with_capacity(voxels);
    for _ in 0..voxels {
        counts.push(r.u8("header")?);
        offsets.push(r.u32("header")?);
    }
    let records = r.bytes(count as usize * width, "segments")?;
    let segments = records.chunks_exact(width).map(|c| unpack_segment(c, spec.bins)).collect::<Result<Vec<_>>>()?;
    let entries = (0..TransferTable::SIZE)
        .map(|_| Ok([r.f32("transfer")?, r.f32("transfer")?, r.f32("transfer")?, r.f32("transfer")?]))
        .collect::<Result<Vec<_>>>()?;
    let mut model = VoxelModel::from_parts(spec, counts, offsets, segments, TransferTable::from_entries(entries)?)?;
    let mut file = VxlFile { model: model.clone(), octree: None, reps: None, ao: None };
    while r.remaining() > 0 {
        let tag = r.array::<4>("chunk tag")?;
        let len = r.u64("chunk length")?;
        if len > r.remaining() as u64 {
            return Err(Error::Truncated(format!("chunk {} claims {len} bytes", String::from_utf8_lossy(&tag))));
        }
        let mut c = Reader::new(r.bytes(len as usize, "chunk")?);
        match &tag {
            TAG_ORIGINS => {
                let origins =
                    (0..count).map(|_| Ok(SegmentOrigin { curve: c.u32("origins")?, seq: c.u32("origins")? })).collect::<Result<Vec<_>>>()?;
                model.set_origins(origins)?;
            }
            TAG_DENSITY => {
                let n = c.u32("density levels")?;
                let levels = (0..n).map(|_| read_field(&mut c, "density")).collect::<Result<Vec<_>>>()?;
                if levels.first().map(|f| f.dims) != Some(dims) {
                    return Err(Error::Format("density field does not match the grid".into()));
                }
                file.octree = Some(DensityOctree { levels });
            }
            TAG_REPLINES => file.reps = Some(read_replines(&mut c)?),
            TAG_AO => {
                let f = read_field(&mut c, "ambient occlusion")?;
                if f.dims != dims {
                    return Err(Error::Format("occlusion field does not match the grid".into()));
                }
                file.ao = Some(f);
            }
            _ => log::debug!("skipping unknown chunk {:?}", String::from_utf8_lossy(&tag)),
        }
    }
    file.model = model;
    Ok(file)
}

fn read_replines(c: &mut Reader) -> Result<RepLineField> {
    let bins = c.u32("replines")?;
    let n = c.u32("replines")?;
    let mut levels = Vec::new();
    for _ in 0..n {
        let level = c.u32("replines")?;
        let dims = read_dims(c, "replines")?;
        let total = dims.iter().map(|&d| d as usize).product::<usize>();
        let present = c.u64("replines")?;
        let mut lines = vec![None; total];
        for _ in 0..present {
            let i = c.u64("replines")? as usize;
            let start = FacePoint { face: c.u8("replines")?, bin: c.u32("replines")? };
            let end = FacePoint { face: c.u8("replines")?, bin: c.u32("replines")? };
            let weight = c.f32("replines")?;
            if i >= total || start.face > 5 || end.face > 5 || start.bin >= bins * bins || end.bin >= bins * bins {
                return Err(Error::Format(format!("representative {i} out of range")));
            }
            lines[i] = Some(RepLine { start, end, weight });
        }
        levels.push(RepLevel { level, dims, lines });
    }
    Ok(RepLineField { bins, levels })
}
