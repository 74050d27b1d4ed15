use image::RgbImage;

use super::{ChromaSpec, Detection, DEFAULT_LABEL};
use crate::raster::Rgb;

/// Components smaller than this are treated as noise.
pub const MIN_COMPONENT_AREA_PX: usize = 25;

struct Component {
    area: usize,
    min: (u32, u32),
    max: (u32, u32),
}

/// 4-connected components of pixels within tolerance of the target color.
/// Each component of at least [`MIN_COMPONENT_AREA_PX`] pixels yields its
/// tight box, scored by area relative to the largest component. Results are
/// ordered by descending score, then raster order of discovery.
pub fn detect_chroma(image: &RgbImage, spec: &ChromaSpec) -> Vec<Detection> {
    let (w, h) = image.dimensions();
    let mask: Vec<bool> = image
        .pixels()
        .map(|p| Rgb::from(*p).within(&spec.target, spec.tolerance))
        .collect();
    let mut seen = vec![false; mask.len()];
    let mut components = Vec::new();
    let mut stack = Vec::new();

    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut c = Component {
            area: 0,
            min: (u32::MAX, u32::MAX),
            max: (0, 0),
        };
        while let Some(idx) = stack.pop() {
            let (x, y) = ((idx % w as usize) as u32, (idx / w as usize) as u32);
            c.area += 1;
            c.min = (c.min.0.min(x), c.min.1.min(y));
            c.max = (c.max.0.max(x), c.max.1.max(y));
            let mut visit = |nx: u32, ny: u32| {
                let n = (ny * w + nx) as usize;
                if mask[n] && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            };
            if x > 0 {
                visit(x - 1, y);
            }
            if x + 1 < w {
                visit(x + 1, y);
            }
            if y > 0 {
                visit(x, y - 1);
            }
            if y + 1 < h {
                visit(x, y + 1);
            }
        }
        if c.area >= MIN_COMPONENT_AREA_PX {
            components.push(c);
        }
    }

    let largest = components.iter().map(|c| c.area).max().unwrap_or(0);
    let mut out: Vec<Detection> = components
        .iter()
        .map(|c| Detection {
            bbox_xywh: [
                c.min.0 as f64,
                c.min.1 as f64,
                (c.max.0 - c.min.0 + 1) as f64,
                (c.max.1 - c.min.1 + 1) as f64,
            ],
            score: c.area as f64 / largest as f64,
            label: DEFAULT_LABEL.to_string(),
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CRIMSON: Rgb = Rgb::new(0xDC, 0x14, 0x3C);

    fn spec() -> ChromaSpec {
        ChromaSpec {
            target: CRIMSON,
            tolerance: 8,
        }
    }

    fn canvas(w: u32, h: u32) -> RgbImage {
        RgbImage::from_pixel(w, h, image::Rgb([255, 255, 255]))
    }

    fn fill(img: &mut RgbImage, x: u32, y: u32, w: u32, h: u32) {
        for yy in y..y + h {
            for xx in x..x + w {
                img.put_pixel(xx, yy, CRIMSON.into());
            }
        }
    }

    #[test]
    fn single_rectangle() {
        let mut img = canvas(200, 200);
        fill(&mut img, 10, 20, 30, 40);
        let d = detect_chroma(&img, &spec());
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].bbox_xywh, [10.0, 20.0, 30.0, 40.0]);
        assert_eq!(d[0].score, 1.0);
        assert_eq!(d[0].label, "building");
    }

    #[test]
    fn nothing_to_find() {
        assert!(detect_chroma(&canvas(50, 50), &spec()).is_empty());
    }

    #[test]
    fn two_rectangles_scored_by_area() {
        let mut img = canvas(200, 200);
        fill(&mut img, 100, 100, 20, 30); // 600
        fill(&mut img, 0, 0, 40, 30); // 1200
        let d = detect_chroma(&img, &spec());
        assert_eq!(d.len(), 2);
        assert_eq!((d[0].score, d[1].score), (1.0, 0.5));
        assert_eq!(d[0].bbox_xywh, [0.0, 0.0, 40.0, 30.0]);
    }

    #[test]
    fn diagonal_pixels_are_not_connected_and_small_blobs_drop() {
        let mut img = canvas(20, 20);
        for i in 0..10 {
            img.put_pixel(i, i, CRIMSON.into());
        }
        fill(&mut img, 12, 12, 4, 6); // 24 px, below the floor
        assert!(detect_chroma(&img, &spec()).is_empty());
        fill(&mut img, 12, 12, 5, 5);
        assert_eq!(detect_chroma(&img, &spec()).len(), 1);
    }

    #[test]
    fn tolerance_is_per_channel() {
        let mut img = canvas(10, 10);
        for y in 0..10 {
            for x in 0..5 {
                img.put_pixel(x, y, image::Rgb([0xDC + 8, 0x14 - 8, 0x3C]));
            }
            for x in 5..10 {
                img.put_pixel(x, y, image::Rgb([0xDC, 0x14, 0x3C + 9]));
            }
        }
        let d = detect_chroma(&img, &spec());
        assert_eq!(d[0].bbox_xywh, [0.0, 0.0, 5.0, 10.0]);
    }

    proptest! {
        #[test]
        fn translation_equivariant(x in 0u32..100, y in 0u32..100, w in 5u32..40, h in 5u32..40, dx in 0u32..50, dy in 0u32..50) {
            let mut a = canvas(200, 200);
            fill(&mut a, x, y, w, h);
            let mut b = canvas(200, 200);
            fill(&mut b, x + dx, y + dy, w, h);
            let da = detect_chroma(&a, &spec());
            let db = detect_chroma(&b, &spec());
            prop_assert_eq!(da.len(), 1);
            let [ax, ay, aw, ah] = da[0].bbox_xywh;
            prop_assert_eq!(db[0].bbox_xywh, [ax + dx as f64, ay + dy as f64, aw, ah]);
        }

        #[test]
        fn boxes_stay_inside_random_images(w in 8u32..64, h in 8u32..64, seed in any::<u64>()) {
            let mut state = seed | 1;
            let img = RgbImage::from_fn(w, h, |_, _| {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                if state % 3 == 0 { CRIMSON.into() } else { image::Rgb([0, 0, 0]) }
            });
            let first = detect_chroma(&img, &spec());
            prop_assert_eq!(&first, &detect_chroma(&img, &spec()));
            for d in first {
                let [x, y, bw, bh] = d.bbox_xywh;
                prop_assert!(bw > 0.0 && bh > 0.0 && x >= 0.0 && y >= 0.0);
                prop_assert!(x + bw <= w as f64 && y + bh <= h as f64);
                prop_assert!(d.score > 0.0 && d.score <= 1.0);
            }
        }
    }
}
