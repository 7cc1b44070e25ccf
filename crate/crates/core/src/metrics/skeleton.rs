//! Two-subiteration thinning and 8-connected component labelling.

/// Binary grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonMap {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<bool>,
    /// 8-connected components, each a list of flat indices.
    pub components: Vec<Vec<usize>>,
}

impl SkeletonMap {
    pub fn from_pixels(pixels: Vec<bool>, height: usize, width: usize) -> SkeletonMap {
        let components = components_8(&pixels, height, width);
        SkeletonMap {
            height,
            width,
            pixels,
            components,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }
}

/// Neighbors P2..P9 clockwise from north; out-of-grid counts as background.
#[inline]
fn neighbors(px: &[bool], h: usize, w: usize, r: usize, c: usize) -> [bool; 8] {
    let at = |dr: isize, dc: isize| -> bool {
        let (rr, cc) = (r as isize + dr, c as isize + dc);
        rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < w && px[rr as usize * w + cc as usize]
    };
    [
        at(-1, 0),
        at(-1, 1),
        at(0, 1),
        at(1, 1),
        at(1, 0),
        at(1, -1),
        at(0, -1),
        at(-1, -1),
    ]
}

/// Zhang-Suen thinning. A foreground pixel is removed in a subiteration
/// when it has 2 to 6 foreground neighbors, exactly one background to
/// foreground transition around its neighborhood, and satisfies that
/// subiteration's directional condition. Subiterations alternate until
/// neither removes anything.
pub fn skeletonize(binary: &[bool], height: usize, width: usize) -> SkeletonMap {
    assert_eq!(binary.len(), height * width, "grid size");
    let mut px = binary.to_vec();
    let mut remove = Vec::new();
    loop {
        let mut changed = false;
        for step in 0..2 {
            remove.clear();
            for r in 0..height {
                for c in 0..width {
                    if !px[r * width + c] {
                        continue;
                    }
                    let n = neighbors(&px, height, width, r, c);
                    let b = n.iter().filter(|&&v| v).count();
                    if !(2..=6).contains(&b) {
                        continue;
                    }
                    let a = (0..8).filter(|&i| !n[i] && n[(i + 1) % 8]).count();
                    if a != 1 {
                        continue;
                    }
                    let [p2, _, p4, _, p6, _, p8, _] = n;
                    let keep = if step == 0 {
                        (p2 && p4 && p6) || (p4 && p6 && p8)
                    } else {
                        (p2 && p4 && p8) || (p2 && p6 && p8)
                    };
                    if !keep {
                        remove.push(r * width + c);
                    }
                }
            }
            for &i in &remove {
                px[i] = false;
            }
            changed |= !remove.is_empty();
        }
        if !changed {
            break;
        }
    }
    SkeletonMap::from_pixels(px, height, width)
}

/// Maximal 8-connected sets of foreground pixels, in raster order of
/// their first pixel.
pub fn components_8(px: &[bool], height: usize, width: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; px.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..px.len() {
        if !px[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut comp = Vec::new();
        while let Some(i) = stack.pop() {
            comp.push(i);
            let (r, c) = (i / width, i % width);
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    let (rr, cc) = (r as isize + dr, c as isize + dc);
                    if rr < 0 || cc < 0 || rr as usize >= height || cc as usize >= width {
                        continue;
                    }
                    let j = rr as usize * width + cc as usize;
                    if px[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}
