use super::bytes::{put_f32s, Reader};
use crate::error::{Error, Result};

pub const WUN1_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

/// Raw checkpoint contents: a JSON configuration blob and named float32
/// tensors in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Wun1 {
    pub config: String,
    pub tensors: Vec<NamedTensor>,
}

pub fn encode_wun1(ckpt: &Wun1) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(b"WUN1");
    out.extend_from_slice(&WUN1_VERSION.to_le_bytes());
    let blob = ckpt.config.as_bytes();
    let blob_len = u32::try_from(blob.len()).map_err(|_| Error::Usage("config blob too large".into()))?;
    out.extend_from_slice(&blob_len.to_le_bytes());
    out.extend_from_slice(blob);
    out.extend_from_slice(&(ckpt.tensors.len() as u32).to_le_bytes());
    for t in &ckpt.tensors {
        let name = t.name.as_bytes();
        let name_len = u16::try_from(name.len())
            .map_err(|_| Error::Usage(format!("tensor name {} too long", t.name)))?;
        let rank = u8::try_from(t.shape.len())
            .map_err(|_| Error::Usage(format!("tensor {} has too many axes", t.name)))?;
        if t.shape.iter().product::<usize>() != t.data.len() {
            return Err(Error::Dimension(format!("tensor {} data does not match its shape", t.name)));
        }
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name);
        out.push(rank);
        for &e in &t.shape {
            let e = u32::try_from(e).map_err(|_| Error::Usage(format!("extent of {} too large", t.name)))?;
            out.extend_from_slice(&e.to_le_bytes());
        }
        put_f32s(&mut out, t.data.iter().copied());
    }
    Ok(out)
}

pub fn decode_wun1(bytes: &[u8]) -> Result<Wun1> {
    let mut r = Reader::new(bytes);
    r.magic(b"WUN1")?;
    let at = r.pos();
    let version = r.u16("version")?;
    if version != WUN1_VERSION {
        return Err(Error::format(at, format!("unsupported WUN1 version {version}")));
    }
    let len = r.u32("config length")? as usize;
    let at = r.pos();
    let config = std::str::from_utf8(r.take(len, "config blob")?)
        .map_err(|e| Error::format(at + e.valid_up_to(), "config blob is not UTF-8"))?
        .to_string();
    let count = r.u32("tensor count")? as usize;
    let mut tensors = Vec::with_capacity(count.min(4096));
    for i in 0..count {
        let name_len = r.u16("tensor name length")? as usize;
        let at = r.pos();
        let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
            .map_err(|_| Error::format(at, format!("tensor {i} name is not UTF-8")))?
            .to_string();
        let rank = r.u8("tensor rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("tensor extent")? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, &e| a.checked_mul(e))
            .ok_or_else(|| Error::format(r.pos(), format!("tensor {name} size overflows")))?;
        let data = r.f32s(n, &format!("data of tensor {name}"))?;
        tensors.push(NamedTensor { name, shape, data });
    }
    if r.remaining() != 0 {
        return Err(Error::format(r.pos(), format!("{} trailing bytes", r.remaining())));
    }
    Ok(Wun1 { config, tensors })
}
