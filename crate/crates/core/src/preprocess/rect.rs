//! Largest axis-aligned rectangle inside a pixel mask.

use crate::error::Result;
use crate::image::PixelRegion;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub fn area(&self) -> usize {
        self.height * self.width
    }

    /// Ordering key: larger area first, then smaller top, left, height.
    fn beats(&self, other: &Rect) -> bool {
        (std::cmp::Reverse(self.area()), self.top, self.left, self.height)
            < (std::cmp::Reverse(other.area()), other.top, other.left, other.height)
    }
}

/// Largest rectangle fully inside `mask`. Ties go to the smaller top, then
/// the smaller left, then the smaller height.
///
/// For every pair of rows the columns set in all rows between them are
/// computed incrementally; the longest run of such columns is the best
/// rectangle spanning exactly those rows.
pub fn max_inscribed_rect(mask: &PixelRegion) -> Result<Rect> {
    let (h, w) = (mask.height(), mask.width());
    let m = mask.to_mask();
    let mut best: Option<Rect> = None;
    let mut all = vec![false; w];
    for top in 0..h {
        if let Some(b) = best {
            if (h - top) * w < b.area() {
                break;
            }
        }
        all.copy_from_slice(&m[top * w..(top + 1) * w]);
        for bottom in top..h {
            if bottom > top {
                for (a, &v) in all.iter_mut().zip(&m[bottom * w..(bottom + 1) * w]) {
                    *a &= v;
                }
            }
            let height = bottom - top + 1;
            let mut run_start = 0;
            let mut run = 0;
            let mut longest = (0, 0);
            for (c, &v) in all.iter().enumerate() {
                if v {
                    if run == 0 {
                        run_start = c;
                    }
                    run += 1;
                    if run > longest.1 {
                        longest = (run_start, run);
                    }
                } else {
                    run = 0;
                }
            }
            if longest.1 == 0 {
                break;
            }
            let cand = Rect {
                top,
                left: longest.0,
                height,
                width: longest.1,
            };
            if best.map_or(true, |b| cand.beats(&b)) {
                best = Some(cand);
            }
        }
    }
    // PixelRegion is never empty, so some row had a set pixel
    Ok(best.expect("non-empty region has a rectangle"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exhaustive(mask: &[bool], h: usize, w: usize) -> Rect {
        let mut best: Option<Rect> = None;
        for top in 0..h {
            for left in 0..w {
                for height in 1..=h - top {
                    for width in 1..=w - left {
                        let inside = (top..top + height).all(|r| (left..left + width).all(|c| mask[r * w + c]));
                        if inside {
                            let r = Rect {
                                top,
                                left,
                                height,
                                width,
                            };
                            if best.map_or(true, |b| r.beats(&b)) {
                                best = Some(r);
                            }
                        }
                    }
                }
            }
        }
        best.unwrap()
    }

    #[test]
    fn full_frame() {
        let region = PixelRegion::from_mask(&[true; 12], 3, 4).unwrap();
        assert_eq!(
            max_inscribed_rect(&region).unwrap(),
            Rect {
                top: 0,
                left: 0,
                height: 3,
                width: 4
            }
        );
    }

    #[test]
    fn l_shape_tie() {
        // a 10x10 square with the 5x5 overlap of a second square removed
        let (h, w) = (10, 10);
        let mask: Vec<bool> = (0..h * w).map(|i| !(i / w >= 5 && i % w >= 5)).collect();
        let region = PixelRegion::from_mask(&mask, h, w).unwrap();
        let got = max_inscribed_rect(&region).unwrap();
        assert_eq!(got.area(), 50);
        assert_eq!(got, exhaustive(&mask, h, w));
        assert_eq!((got.top, got.left, got.height, got.width), (0, 0, 5, 10));
    }

    #[test]
    fn rotated_square() {
        let n = 31;
        let c = 15.0f64;
        let mask: Vec<bool> = (0..n * n)
            .map(|i| ((i / n) as f64 - c).abs() + ((i % n) as f64 - c).abs() <= 14.0)
            .collect();
        let region = PixelRegion::from_mask(&mask, n, n).unwrap();
        assert_eq!(max_inscribed_rect(&region).unwrap(), exhaustive(&mask, n, n));
    }
}
