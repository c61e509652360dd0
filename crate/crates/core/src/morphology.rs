//! Connected components, small-object removal and Zhang-Suen thinning.
//!
//! Foreground connectivity is 8-neighbour throughout: diagonal steps join
//! pixels, so narrow diagonal petioles and margins stay attached to the blade.

use alloc::vec::Vec;

use crate::segmentation::BinaryMask;

/// Foreground partitioned into maximal 8-connected objects.
///
/// `labels` holds 0 for background and ids `1..=n` for objects. Ids follow
/// the raster-scan order of each object's first pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledComponents {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    areas: Vec<usize>,
}

impl LabeledComponents {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.areas.len()
    }

    /// Pixel counts; entry `i` belongs to id `i + 1`.
    pub fn areas(&self) -> &[usize] {
        &self.areas
    }

    /// Panics for id 0 or ids above [`count`](Self::count).
    pub fn area(&self, id: u32) -> usize {
        assert!(id != 0, "id 0 is background");
        self.areas[id as usize - 1]
    }

    pub fn total_area(&self) -> usize {
        self.areas.iter().sum()
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let grand = parent[parent[x as usize] as usize];
        parent[x as usize] = grand;
        x = grand;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) -> u32 {
    let ra = find(parent, a);
    let rb = find(parent, b);
    let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
    parent[hi as usize] = lo;
    lo
}

/// Two-pass union-find labeling with 8-connectivity.
pub fn label_components(mask: &BinaryMask) -> LabeledComponents {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();
    let mut labels = alloc::vec![0u32; w * h];
    // parent[0] is the background sentinel.
    let mut parent: Vec<u32> = alloc::vec![0];

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !bits[i] {
                continue;
            }
            // Already-visited neighbours: W, NW, N, NE.
            let mut current = 0u32;
            let mut visit = |n: u32, parent: &mut Vec<u32>| {
                if n != 0 {
                    current = if current == 0 { find(parent, n) } else { union(parent, current, n) };
                }
            };
            if x > 0 {
                visit(labels[i - 1], &mut parent);
            }
            if y > 0 {
                let up = i - w;
                if x > 0 {
                    visit(labels[up - 1], &mut parent);
                }
                visit(labels[up], &mut parent);
                if x + 1 < w {
                    visit(labels[up + 1], &mut parent);
                }
            }
            if current == 0 {
                current = parent.len() as u32;
                parent.push(current);
            }
            labels[i] = current;
        }
    }

    // Second pass: dense ids in order of first appearance.
    let mut remap = alloc::vec![0u32; parent.len()];
    let mut areas = Vec::new();
    for label in labels.iter_mut().filter(|l| **l != 0) {
        let root = find(&mut parent, *label) as usize;
        if remap[root] == 0 {
            areas.push(0);
            remap[root] = areas.len() as u32;
        }
        let id = remap[root];
        areas[id as usize - 1] += 1;
        *label = id;
    }

    LabeledComponents { width: w, height: h, labels, areas }
}

/// Keeps the components whose area is at least `min_area`.
pub fn remove_small_components(lc: &LabeledComponents, min_area: usize) -> BinaryMask {
    let keep: Vec<bool> = core::iter::once(false)
        .chain(lc.areas.iter().map(|&a| a >= min_area))
        .collect();
    let bits = lc.labels.iter().map(|&l| keep[l as usize]).collect();
    BinaryMask::from_bits(lc.width, lc.height, bits)
}

pub fn count_foreground(mask: &BinaryMask) -> usize {
    mask.bits().iter().filter(|&&b| b).count()
}

/// Offsets of P2..P9 (N, NE, E, SE, S, SW, W, NW) in a buffer with one pixel
/// of padding on every side.
fn neighbour_offsets(stride: isize) -> [isize; 8] {
    [-stride, -stride + 1, 1, stride + 1, stride, stride - 1, -1, -stride - 1]
}

#[inline]
fn neighbourhood(buf: &[u8], i: usize, offsets: &[isize; 8]) -> [u8; 8] {
    offsets.map(|o| buf[(i as isize + o) as usize])
}

/// Number of background-to-foreground transitions walking P2..P9 and back to P2.
#[inline]
fn transitions(n: &[u8; 8]) -> u32 {
    (0..8).filter(|&k| n[k] == 0 && n[(k + 1) % 8] == 1).count() as u32
}

fn padded(mask: &BinaryMask) -> (Vec<u8>, usize) {
    let stride = mask.width() + 2;
    let mut buf = alloc::vec![0u8; stride * (mask.height() + 2)];
    for (y, row) in mask.bits().chunks_exact(mask.width().max(1)).enumerate() {
        let start = (y + 1) * stride + 1;
        for (dst, &b) in buf[start..start + row.len()].iter_mut().zip(row) {
            *dst = b as u8;
        }
    }
    (buf, stride)
}

/// Runs Zhang-Suen passes over a padded buffer until one deletes nothing.
///
/// Each pass has two sub-iterations; within a sub-iteration every deletion
/// decision reads the state left by the previous one, so the result does not
/// depend on scan order. Returns whether anything was deleted.
fn zhang_suen_passes(buf: &mut [u8], live: &mut Vec<usize>, offsets: &[isize; 8]) -> bool {
    let mut doomed = Vec::new();
    let mut any = false;
    loop {
        let mut changed = false;
        for first in [true, false] {
            doomed.clear();
            for &i in live.iter() {
                let n = neighbourhood(buf, i, offsets);
                let b: u8 = n.iter().sum();
                if !(2..=6).contains(&b) || transitions(&n) != 1 {
                    continue;
                }
                let [p2, _, p4, _, p6, _, p8, _] = n;
                let keep = if first {
                    p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0
                } else {
                    p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0
                };
                if !keep {
                    doomed.push(i);
                }
            }
            for &i in &doomed {
                buf[i] = 0;
            }
            if !doomed.is_empty() {
                changed = true;
                live.retain(|&i| buf[i] == 1);
            }
        }
        if !changed {
            return any;
        }
        any = true;
    }
}

fn unpad(buf: &[u8], stride: usize, w: usize, h: usize) -> BinaryMask {
    BinaryMask::from_fn(w, h, |x, y| buf[(y + 1) * stride + x + 1] == 1)
}

/// Plain Zhang-Suen thinning, iterated until a full pass deletes nothing.
///
/// Pixels outside the mask count as background. The result can still hold
/// solid 2x2 blocks and loses components that erode to a 2x2 square; [`thin`]
/// fixes both.
pub fn zhang_suen(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    if w == 0 || h == 0 {
        return mask.clone();
    }
    let (mut buf, stride) = padded(mask);
    let offsets = neighbour_offsets(stride as isize);
    let mut live: Vec<usize> = (0..buf.len()).filter(|&i| buf[i] == 1).collect();
    zhang_suen_passes(&mut buf, &mut live, &offsets);
    unpad(&buf, stride, w, h)
}

/// Yokoi connectivity number for 8-connected foreground. A pixel whose
/// number is 1 can be deleted without changing the topology.
#[inline]
fn yokoi8(n: &[u8; 8]) -> u8 {
    let c = n.map(|v| 1 - v);
    [0, 2, 4, 6].iter().map(|&k| c[k] - c[k] * c[k + 1] * c[(k + 2) % 8]).sum()
}

/// Number of 8-connected foreground groups among the eight neighbours.
fn neighbour_groups(n: &[u8; 8]) -> u32 {
    // Ring positions N, NE, E, SE, S, SW, W, NW as (dx, dy).
    const RING: [(i8, i8); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];
    let mut unseen: u8 = (0..8).filter(|&k| n[k] == 1).fold(0, |m, k| m | 1 << k);
    let mut groups = 0;
    while unseen != 0 {
        groups += 1;
        let mut stack = 1u8 << unseen.trailing_zeros();
        unseen &= !stack;
        while stack != 0 {
            let k = stack.trailing_zeros() as usize;
            stack &= !(1 << k);
            for j in 0..8 {
                let adjacent = (RING[k].0 - RING[j].0).abs() <= 1 && (RING[k].1 - RING[j].1).abs() <= 1;
                if unseen & (1 << j) != 0 && adjacent {
                    unseen &= !(1 << j);
                    stack |= 1 << j;
                }
            }
        }
    }
    groups
}

/// Top-left corners (as buffer indices) of the 2x2 windows containing `i`.
#[inline]
fn block_corners(i: usize, stride: usize) -> [usize; 4] {
    [i - stride - 1, i - stride, i - 1, i]
}

#[inline]
fn is_solid_block(buf: &[u8], corner: usize, stride: usize) -> bool {
    buf[corner] & buf[corner + 1] & buf[corner + stride] & buf[corner + stride + 1] == 1
}

/// Deletes, in raster order, every pixel that sits in a solid 2x2 block and
/// is a simple point.
fn remove_simple_block_pixels(buf: &mut [u8], stride: usize, offsets: &[isize; 8]) -> bool {
    let mut changed = false;
    for i in stride..buf.len() - stride {
        if buf[i] == 0 || !block_corners(i, stride).iter().any(|&c| is_solid_block(buf, c, stride)) {
            continue;
        }
        if yokoi8(&neighbourhood(buf, i, offsets)) == 1 {
            buf[i] = 0;
            changed = true;
        }
    }
    changed
}

/// Breaks every remaining solid 2x2 block by deleting one of its pixels,
/// preferring one whose neighbours stay 8-connected, then the one with the
/// fewest neighbours. Blocks only survive the simple-point pass when they
/// close one-pixel holes, so this may merge holes.
fn break_remaining_blocks(buf: &mut [u8], stride: usize, offsets: &[isize; 8]) -> bool {
    let mut changed = false;
    for corner in stride..buf.len() - 2 * stride {
        if !is_solid_block(buf, corner, stride) {
            continue;
        }
        let victim = [corner, corner + 1, corner + stride, corner + stride + 1]
            .into_iter()
            .min_by_key(|&i| {
                let n = neighbourhood(buf, i, offsets);
                (neighbour_groups(&n) != 1, n.iter().sum::<u8>())
            })
            .expect("block has four pixels");
        buf[victim] = 0;
        changed = true;
    }
    changed
}

/// Thins every component to a one-pixel-wide skeleton.
///
/// Zhang-Suen passes run to convergence, then any solid 2x2 block left
/// behind is broken up (simple points first) and the passes resume, until
/// nothing changes. Components that erode away entirely keep the pixel
/// closest to their centroid. The output is a subset of the input, holds no
/// solid 2x2 block, and is a fixed point: `thin(thin(m)) == thin(m)`.
pub fn thin(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    if w == 0 || h == 0 {
        return mask.clone();
    }
    let (mut buf, stride) = padded(mask);
    let offsets = neighbour_offsets(stride as isize);
    let mut live: Vec<usize> = (0..buf.len()).filter(|&i| buf[i] == 1).collect();

    loop {
        zhang_suen_passes(&mut buf, &mut live, &offsets);
        let cleaned = remove_simple_block_pixels(&mut buf, stride, &offsets)
            || break_remaining_blocks(&mut buf, stride, &offsets);
        if !cleaned {
            break;
        }
        live.retain(|&i| buf[i] == 1);
    }

    let mut skeleton = unpad(&buf, stride, w, h);
    restore_vanished(mask, &mut skeleton);
    skeleton
}

fn restore_vanished(mask: &BinaryMask, skeleton: &mut BinaryMask) {
    let lc = label_components(mask);
    let n = lc.count();
    let mut survived = alloc::vec![false; n + 1];
    let mut sums = alloc::vec![(0usize, 0usize); n + 1];
    for (i, &id) in lc.labels.iter().enumerate() {
        if id != 0 {
            let (x, y) = (i % lc.width, i / lc.width);
            survived[id as usize] |= skeleton.get(x, y);
            sums[id as usize].0 += x;
            sums[id as usize].1 += y;
        }
    }
    if survived[1..].iter().all(|&s| s) {
        return;
    }
    // Nearest pixel to the centroid, compared in units of area^2 to stay exact.
    let mut best: Vec<Option<(i128, usize)>> = alloc::vec![None; n + 1];
    for (i, &id) in lc.labels.iter().enumerate() {
        let id = id as usize;
        if id == 0 || survived[id] {
            continue;
        }
        let area = lc.areas[id - 1] as i128;
        let (x, y) = ((i % lc.width) as i128, (i / lc.width) as i128);
        let dx = x * area - sums[id].0 as i128;
        let dy = y * area - sums[id].1 as i128;
        let d = dx * dx + dy * dy;
        if best[id].is_none_or(|(bd, _)| d < bd) {
            best[id] = Some((d, i));
        }
    }
    for (_, i) in best.into_iter().flatten() {
        skeleton.set(i % lc.width, i / lc.width, true);
    }
}

/// Skeleton pixels where three or more branches meet.
///
/// A pixel counts when walking its eight neighbours crosses from background
/// into foreground at least three times.
pub fn skeleton_branch_points(skeleton: &BinaryMask) -> usize {
    if skeleton.width() == 0 || skeleton.height() == 0 {
        return 0;
    }
    let (buf, stride) = padded(skeleton);
    let offsets = neighbour_offsets(stride as isize);
    (0..buf.len())
        .filter(|&i| buf[i] == 1 && transitions(&neighbourhood(&buf, i, &offsets)) >= 3)
        .count()
}
