//! GPS position from (and into) JPEG EXIF metadata.
//!
//! Only what a geotag needs is parsed: the APP1 `Exif` segment, the TIFF
//! header, IFD0's GPS pointer and the four GPS position tags.

use std::path::Path;

use image::RgbImage;

use crate::error::{Error, Result};
use crate::geodesy::GeoPoint;

const TAG_GPS_IFD: u16 = 0x8825;
const TAG_GPS_VERSION: u16 = 0x0000;
const TAG_LAT_REF: u16 = 0x0001;
const TAG_LAT: u16 = 0x0002;
const TAG_LON_REF: u16 = 0x0003;
const TAG_LON: u16 = 0x0004;

const TYPE_BYTE: u16 = 1;
const TYPE_ASCII: u16 = 2;
const TYPE_LONG: u16 = 4;
const TYPE_RATIONAL: u16 = 5;

const EXIF_MAGIC: &[u8] = b"Exif\0\0";

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedExif(msg.into())
}

/// Reads the GPS position from a JPEG's EXIF block.
pub fn read_geotag(jpeg: &[u8]) -> Result<GeoPoint> {
    let tiff = find_exif(jpeg)?.ok_or(Error::MissingGeotag)?;
    let t = Tiff::new(tiff)?;
    let ifd0 = t.u32_at(4)? as usize;
    let gps_offset = match t.find_entry(ifd0, TAG_GPS_IFD)? {
        Some(e) => e.inline_u32(&t)? as usize,
        None => return Err(Error::MissingGeotag),
    };

    let entries =
        [TAG_LAT_REF, TAG_LAT, TAG_LON_REF, TAG_LON].map(|tag| t.find_entry(gps_offset, tag));
    let [lat_ref, lat, lon_ref, lon] = entries;
    let (Some(lat_ref), Some(lat), Some(lon_ref), Some(lon)) = (lat_ref?, lat?, lon_ref?, lon?)
    else {
        return Err(Error::MissingGeotag);
    };

    let lat = signed(sexagesimal(&t, &lat)?, &t.ascii(&lat_ref)?, 'N', 'S')?;
    let lon = signed(sexagesimal(&t, &lon)?, &t.ascii(&lon_ref)?, 'E', 'W')?;
    GeoPoint::new(lat, lon).map_err(|e| malformed(e.to_string()))
}

fn signed(value: f64, reference: &str, pos: char, neg: char) -> Result<f64> {
    match reference.trim().chars().next() {
        Some(c) if c == pos => Ok(value),
        Some(c) if c == neg => Ok(-value),
        _ => Err(malformed(format!(
            "GPS reference {reference:?}, expected {pos} or {neg}"
        ))),
    }
}

fn sexagesimal(t: &Tiff, e: &Entry) -> Result<f64> {
    if e.kind != TYPE_RATIONAL || e.count != 3 {
        return Err(malformed(format!(
            "GPS coordinate has type {} count {}, expected 3 rationals",
            e.kind, e.count
        )));
    }
    let base = e.value_or_offset(t)? as usize;
    let mut parts = [0.0; 3];
    for (i, part) in parts.iter_mut().enumerate() {
        let num = t.u32_at(base + 8 * i)?;
        let den = t.u32_at(base + 8 * i + 4)?;
        if den == 0 {
            return Err(malformed("zero denominator in GPS coordinate"));
        }
        *part = num as f64 / den as f64;
    }
    Ok(parts[0] + parts[1] / 60.0 + parts[2] / 3600.0)
}

/// Returns the TIFF block of the first `Exif` APP1 segment, if any.
fn find_exif(jpeg: &[u8]) -> Result<Option<&[u8]>> {
    if !jpeg.starts_with(&[0xFF, 0xD8]) {
        return Err(malformed("not a JPEG stream"));
    }
    let mut pos = 2;
    while pos + 4 <= jpeg.len() {
        if jpeg[pos] != 0xFF {
            return Err(malformed(format!("expected marker at byte {pos}")));
        }
        let marker = jpeg[pos + 1];
        if marker == 0xFF {
            pos += 1;
            continue;
        }
        // start of scan or end of image: no more metadata segments
        if marker == 0xDA || marker == 0xD9 {
            break;
        }
        if (0xD0..=0xD7).contains(&marker) || marker == 0x01 {
            pos += 2;
            continue;
        }
        let len = u16::from_be_bytes([jpeg[pos + 2], jpeg[pos + 3]]) as usize;
        let end = pos + 2 + len;
        if len < 2 || end > jpeg.len() {
            return Err(malformed(format!(
                "segment at byte {pos} overruns the file"
            )));
        }
        let body = &jpeg[pos + 4..end];
        if marker == 0xE1 && body.starts_with(EXIF_MAGIC) {
            return Ok(Some(&body[EXIF_MAGIC.len()..]));
        }
        pos = end;
    }
    Ok(None)
}

struct Tiff<'a> {
    data: &'a [u8],
    little_endian: bool,
}

struct Entry {
    kind: u16,
    count: u32,
    /// Position of the 4-byte value/offset field.
    field: usize,
}

impl Entry {
    fn size(&self) -> Result<usize> {
        let unit = match self.kind {
            1 | 2 | 6 | 7 => 1,
            3 | 8 => 2,
            4 | 9 | 11 => 4,
            5 | 10 | 12 => 8,
            k => return Err(malformed(format!("unknown TIFF type {k}"))),
        };
        Ok(unit * self.count as usize)
    }

    /// Offset of the value bytes: inline when they fit in four bytes.
    fn value_or_offset(&self, t: &Tiff) -> Result<u32> {
        if self.size()? <= 4 {
            Ok(self.field as u32)
        } else {
            t.u32_at(self.field)
        }
    }

    fn inline_u32(&self, t: &Tiff) -> Result<u32> {
        if self.count != 1 || !(self.kind == TYPE_LONG || self.kind == 13) {
            return Err(malformed("GPS IFD pointer is not a single LONG"));
        }
        t.u32_at(self.field)
    }
}

impl<'a> Tiff<'a> {
    fn new(data: &'a [u8]) -> Result<Self> {
        let little_endian = match data.get(..4) {
            Some([b'I', b'I', 42, 0]) => true,
            Some([b'M', b'M', 0, 42]) => false,
            _ => return Err(malformed("bad TIFF header")),
        };
        Ok(Self {
            data,
            little_endian,
        })
    }

    fn bytes<const N: usize>(&self, at: usize) -> Result<[u8; N]> {
        self.data
            .get(at..at + N)
            .and_then(|s| s.try_into().ok())
            .ok_or_else(|| malformed(format!("offset {at} outside the EXIF block")))
    }

    fn u16_at(&self, at: usize) -> Result<u16> {
        let b = self.bytes::<2>(at)?;
        Ok(if self.little_endian {
            u16::from_le_bytes(b)
        } else {
            u16::from_be_bytes(b)
        })
    }

    fn u32_at(&self, at: usize) -> Result<u32> {
        let b = self.bytes::<4>(at)?;
        Ok(if self.little_endian {
            u32::from_le_bytes(b)
        } else {
            u32::from_be_bytes(b)
        })
    }

    fn find_entry(&self, ifd: usize, tag: u16) -> Result<Option<Entry>> {
        let count = self.u16_at(ifd)? as usize;
        for i in 0..count {
            let at = ifd + 2 + 12 * i;
            if self.u16_at(at)? == tag {
                return Ok(Some(Entry {
                    kind: self.u16_at(at + 2)?,
                    count: self.u32_at(at + 4)?,
                    field: at + 8,
                }));
            }
        }
        Ok(None)
    }

    fn ascii(&self, e: &Entry) -> Result<String> {
        if e.kind != TYPE_ASCII {
            return Err(malformed("GPS reference is not ASCII"));
        }
        let at = e.value_or_offset(self)? as usize;
        let raw = self
            .data
            .get(at..at + e.count as usize)
            .ok_or_else(|| malformed("GPS reference outside the EXIF block"))?;
        Ok(String::from_utf8_lossy(raw)
            .trim_end_matches('\0')
            .to_string())
    }
}

/// Degrees, minutes and micro-seconds of arc as EXIF rationals.
fn to_rationals(deg: f64) -> [(u32, u32); 3] {
    let total = (deg.abs() * 3_600_000_000.0).round() as u64;
    let d = total / 3_600_000_000;
    let m = (total % 3_600_000_000) / 60_000_000;
    let us = total % 60_000_000;
    [(d as u32, 1), (m as u32, 1), (us as u32, 1_000_000)]
}

/// Little-endian TIFF block holding IFD0 with only a GPS pointer, and a GPS
/// IFD with version and position tags.
fn gps_tiff(gps: &GeoPoint) -> Vec<u8> {
    const IFD0: u32 = 8;
    const GPS_IFD: u32 = IFD0 + 2 + 12 + 4;
    const GPS_ENTRIES: u32 = 5;
    const LAT_DATA: u32 = GPS_IFD + 2 + 12 * GPS_ENTRIES + 4;
    const LON_DATA: u32 = LAT_DATA + 24;

    let mut out = Vec::with_capacity(LON_DATA as usize + 24);
    let entry = |out: &mut Vec<u8>, tag: u16, kind: u16, count: u32, value: [u8; 4]| {
        out.extend_from_slice(&tag.to_le_bytes());
        out.extend_from_slice(&kind.to_le_bytes());
        out.extend_from_slice(&count.to_le_bytes());
        out.extend_from_slice(&value);
    };
    let lat_ref = if gps.lat_deg() < 0.0 { b'S' } else { b'N' };
    let lon_ref = if gps.lon_deg() < 0.0 { b'W' } else { b'E' };

    out.extend_from_slice(b"II");
    out.extend_from_slice(&42u16.to_le_bytes());
    out.extend_from_slice(&IFD0.to_le_bytes());

    out.extend_from_slice(&1u16.to_le_bytes());
    entry(&mut out, TAG_GPS_IFD, TYPE_LONG, 1, GPS_IFD.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());

    out.extend_from_slice(&(GPS_ENTRIES as u16).to_le_bytes());
    entry(&mut out, TAG_GPS_VERSION, TYPE_BYTE, 4, [2, 3, 0, 0]);
    entry(&mut out, TAG_LAT_REF, TYPE_ASCII, 2, [lat_ref, 0, 0, 0]);
    entry(&mut out, TAG_LAT, TYPE_RATIONAL, 3, LAT_DATA.to_le_bytes());
    entry(&mut out, TAG_LON_REF, TYPE_ASCII, 2, [lon_ref, 0, 0, 0]);
    entry(&mut out, TAG_LON, TYPE_RATIONAL, 3, LON_DATA.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());

    for deg in [gps.lat_deg(), gps.lon_deg()] {
        for (num, den) in to_rationals(deg) {
            out.extend_from_slice(&num.to_le_bytes());
            out.extend_from_slice(&den.to_le_bytes());
        }
    }
    out
}

/// Inserts an APP1 segment carrying `tiff` right after SOI (and after a
/// leading JFIF APP0, when present).
pub(crate) fn insert_exif(jpeg: &[u8], tiff: &[u8]) -> Result<Vec<u8>> {
    if !jpeg.starts_with(&[0xFF, 0xD8]) {
        return Err(malformed("not a JPEG stream"));
    }
    let mut at = 2;
    if jpeg.get(2..4) == Some(&[0xFF, 0xE0]) && jpeg.len() >= 6 {
        at = 4 + u16::from_be_bytes([jpeg[4], jpeg[5]]) as usize;
    }
    let len = 2 + EXIF_MAGIC.len() + tiff.len();
    let len = u16::try_from(len).map_err(|_| malformed("EXIF block too large"))?;
    let mut out = Vec::with_capacity(jpeg.len() + len as usize + 2);
    out.extend_from_slice(&jpeg[..at]);
    out.extend_from_slice(&[0xFF, 0xE1]);
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(EXIF_MAGIC);
    out.extend_from_slice(tiff);
    out.extend_from_slice(&jpeg[at..]);
    Ok(out)
}

/// Encodes `image` as a JPEG whose EXIF block records `gps`. Positions
/// survive to a micro-arcsecond (about 30 µm).
pub fn encode_geotagged_jpeg(image: &RgbImage, gps: &GeoPoint) -> Result<Vec<u8>> {
    let mut buf = std::io::Cursor::new(Vec::new());
    image.write_to(&mut buf, image::ImageFormat::Jpeg)?;
    insert_exif(&buf.into_inner(), &gps_tiff(gps))
}

pub fn write_geotagged_jpeg(image: &RgbImage, gps: &GeoPoint, path: &Path) -> Result<()> {
    std::fs::write(path, encode_geotagged_jpeg(image, gps)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn plain_jpeg() -> Vec<u8> {
        let mut buf = std::io::Cursor::new(Vec::new());
        RgbImage::from_pixel(16, 16, image::Rgb([40, 80, 120]))
            .write_to(&mut buf, image::ImageFormat::Jpeg)
            .unwrap();
        buf.into_inner()
    }

    /// Big-endian TIFF with a GPS IFD holding the given raw rationals.
    fn tiff_with(lat: [(u32, u32); 3], lat_ref: u8, lon: [(u32, u32); 3], lon_ref: u8) -> Vec<u8> {
        let mut t = b"MM\0\x2a\0\0\0\x08".to_vec();
        t.extend_from_slice(&1u16.to_be_bytes());
        t.extend_from_slice(&[0x88, 0x25, 0, 4, 0, 0, 0, 1, 0, 0, 0, 26]);
        t.extend_from_slice(&[0; 4]);
        t.extend_from_slice(&4u16.to_be_bytes());
        let data = 26 + 2 + 4 * 12 + 4;
        let entry = |t: &mut Vec<u8>, tag: u16, kind: u16, count: u32, v: [u8; 4]| {
            t.extend_from_slice(&tag.to_be_bytes());
            t.extend_from_slice(&kind.to_be_bytes());
            t.extend_from_slice(&count.to_be_bytes());
            t.extend_from_slice(&v);
        };
        entry(&mut t, 1, 2, 2, [lat_ref, 0, 0, 0]);
        entry(&mut t, 2, 5, 3, (data as u32).to_be_bytes());
        entry(&mut t, 3, 2, 2, [lon_ref, 0, 0, 0]);
        entry(&mut t, 4, 5, 3, (data as u32 + 24).to_be_bytes());
        t.extend_from_slice(&[0; 4]);
        for (n, d) in lat.iter().chain(lon.iter()) {
            t.extend_from_slice(&n.to_be_bytes());
            t.extend_from_slice(&d.to_be_bytes());
        }
        t
    }

    #[test]
    fn sexagesimal_examples() {
        let tiff = tiff_with(
            [(29, 1), (58, 1), (48, 1)],
            b'N',
            [(97, 1), (3, 1), (18, 1)],
            b'W',
        );
        let p = read_geotag(&insert_exif(&plain_jpeg(), &tiff).unwrap()).unwrap();
        assert!((p.lat_deg() - 29.98).abs() < 1e-12);
        assert!((p.lon_deg() + 97.055).abs() < 1e-12);

        let tiff = tiff_with(
            [(10, 1), (30, 1), (0, 1)],
            b'S',
            [(1, 1), (0, 1), (0, 1)],
            b'E',
        );
        let p = read_geotag(&insert_exif(&plain_jpeg(), &tiff).unwrap()).unwrap();
        assert_eq!(p.lat_deg(), -10.5);
        assert_eq!(p.lon_deg(), 1.0);
    }

    #[test]
    fn missing_geotag() {
        assert!(matches!(
            read_geotag(&plain_jpeg()),
            Err(Error::MissingGeotag)
        ));
        // IFD0 present but no GPS pointer
        let tiff = b"II\x2a\0\x08\0\0\0\0\0\0\0\0\0".to_vec();
        let jpeg = insert_exif(&plain_jpeg(), &tiff).unwrap();
        assert!(matches!(read_geotag(&jpeg), Err(Error::MissingGeotag)));
    }

    #[test]
    fn malformed_exif() {
        assert!(matches!(
            read_geotag(b"GIF89a"),
            Err(Error::MalformedExif(_))
        ));
        let bad_header = insert_exif(&plain_jpeg(), b"XX\0\0\0\0\0\0").unwrap();
        assert!(matches!(
            read_geotag(&bad_header),
            Err(Error::MalformedExif(_))
        ));
        let zero_den = tiff_with(
            [(10, 0), (0, 1), (0, 1)],
            b'N',
            [(1, 1), (0, 1), (0, 1)],
            b'E',
        );
        let jpeg = insert_exif(&plain_jpeg(), &zero_den).unwrap();
        assert!(matches!(read_geotag(&jpeg), Err(Error::MalformedExif(_))));
        let bad_ref = tiff_with(
            [(10, 1), (0, 1), (0, 1)],
            b'Q',
            [(1, 1), (0, 1), (0, 1)],
            b'E',
        );
        let jpeg = insert_exif(&plain_jpeg(), &bad_ref).unwrap();
        assert!(matches!(read_geotag(&jpeg), Err(Error::MalformedExif(_))));
        let mut truncated = tiff_with(
            [(10, 1), (0, 1), (0, 1)],
            b'N',
            [(1, 1), (0, 1), (0, 1)],
            b'E',
        );
        truncated.truncate(60);
        let jpeg = insert_exif(&plain_jpeg(), &truncated).unwrap();
        assert!(matches!(read_geotag(&jpeg), Err(Error::MalformedExif(_))));
    }

    #[test]
    fn independent_reader_agrees_with_writer() {
        let gps = GeoPoint::new(-33.856_784_123, 151.215_297_9).unwrap();
        let bytes = encode_geotagged_jpeg(&RgbImage::new(8, 8), &gps).unwrap();
        let exif = exif::Reader::new()
            .read_from_container(&mut std::io::Cursor::new(&bytes))
            .unwrap();
        let dms = |tag| match &exif.get_field(tag, exif::In::PRIMARY).unwrap().value {
            exif::Value::Rational(v) => {
                v[0].to_f64() + v[1].to_f64() / 60.0 + v[2].to_f64() / 3600.0
            }
            other => panic!("{other:?}"),
        };
        let lat = dms(exif::Tag::GPSLatitude);
        let lon = dms(exif::Tag::GPSLongitude);
        let lat_ref = exif
            .get_field(exif::Tag::GPSLatitudeRef, exif::In::PRIMARY)
            .unwrap();
        assert_eq!(lat_ref.display_value().to_string(), "S");
        assert!((lat - 33.856_784_123).abs() < 1e-9);
        assert!((lon - 151.215_297_9).abs() < 1e-9);

        let decoded = image::load_from_memory(&bytes).unwrap();
        assert_eq!(decoded.width(), 8);
    }

    proptest! {
        #[test]
        fn write_read_round_trip(lat in -89.9..89.9f64, lon in -180.0..180.0f64) {
            let gps = GeoPoint::new(lat, lon).unwrap();
            let bytes = encode_geotagged_jpeg(&RgbImage::new(8, 8), &gps).unwrap();
            let back = read_geotag(&bytes).unwrap();
            prop_assert!((back.lat_deg() - gps.lat_deg()).abs() < 2e-10);
            prop_assert!((back.lon_deg() - gps.lon_deg()).abs() < 2e-10);
        }
    }
}
