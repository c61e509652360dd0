//! Slow reference implementations used to cross-check the library.
//!
//! They deliberately share no code with `leafmetric_core`: masks are plain
//! `Vec<Vec<bool>>` grids and everything is done by direct enumeration.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;

pub type Grid = Vec<Vec<bool>>;

fn in_grid(g: &Grid, x: i64, y: i64) -> bool {
    y >= 0 && (y as usize) < g.len() && x >= 0 && (x as usize) < g[0].len() && g[y as usize][x as usize]
}

/// Breadth-first flood fill over 8-neighbours. Components are numbered
/// 1.. in the order a row-major scan first touches them.
pub fn flood_fill_labels(g: &Grid) -> (Vec<Vec<u32>>, Vec<usize>) {
    let h = g.len();
    let w = if h == 0 { 0 } else { g[0].len() };
    let mut labels = vec![vec![0u32; w]; h];
    let mut areas = Vec::new();
    for sy in 0..h {
        for sx in 0..w {
            if !g[sy][sx] || labels[sy][sx] != 0 {
                continue;
            }
            let id = areas.len() as u32 + 1;
            let mut area = 0;
            let mut queue = VecDeque::from([(sx, sy)]);
            labels[sy][sx] = id;
            while let Some((x, y)) = queue.pop_front() {
                area += 1;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if in_grid(g, nx, ny) && labels[ny as usize][nx as usize] == 0 {
                            labels[ny as usize][nx as usize] = id;
                            queue.push_back((nx as usize, ny as usize));
                        }
                    }
                }
            }
            areas.push(area);
        }
    }
    (labels, areas)
}

/// Zhang-Suen thinning on a set of points, following the textbook
/// statement of the two sub-iterations literally.
pub fn zhang_suen(g: &Grid) -> Grid {
    let h = g.len();
    let w = if h == 0 { 0 } else { g[0].len() };
    let mut on: BTreeSet<(i64, i64)> = BTreeSet::new();
    for y in 0..h {
        for x in 0..w {
            if g[y][x] {
                on.insert((x as i64, y as i64));
            }
        }
    }
    let p = |on: &BTreeSet<(i64, i64)>, x: i64, y: i64| -> u32 { on.contains(&(x, y)) as u32 };
    loop {
        let mut removed_any = false;
        for step in 0..2 {
            let mut remove = Vec::new();
            for &(x, y) in &on {
                let p2 = p(&on, x, y - 1);
                let p3 = p(&on, x + 1, y - 1);
                let p4 = p(&on, x + 1, y);
                let p5 = p(&on, x + 1, y + 1);
                let p6 = p(&on, x, y + 1);
                let p7 = p(&on, x - 1, y + 1);
                let p8 = p(&on, x - 1, y);
                let p9 = p(&on, x - 1, y - 1);
                let ring = [p2, p3, p4, p5, p6, p7, p8, p9, p2];
                let b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
                let a = ring.windows(2).filter(|pair| pair[0] == 0 && pair[1] == 1).count();
                let (c, d) = if step == 0 {
                    (p2 * p4 * p6, p4 * p6 * p8)
                } else {
                    (p2 * p4 * p8, p2 * p6 * p8)
                };
                if (2..=6).contains(&b) && a == 1 && c == 0 && d == 0 {
                    remove.push((x, y));
                }
            }
            removed_any |= !remove.is_empty();
            for pt in remove {
                on.remove(&pt);
            }
        }
        if !removed_any {
            break;
        }
    }
    (0..h)
        .map(|y| (0..w).map(|x| on.contains(&(x as i64, y as i64))).collect())
        .collect()
}

pub fn count(g: &Grid) -> usize {
    g.iter().flatten().filter(|&&b| b).count()
}

/// `k` rows by `len` columns of foreground with a 2-pixel empty border.
pub fn bar(k: usize, len: usize) -> Grid {
    (0..k + 4)
        .map(|y| (0..len + 4).map(|x| (2..2 + len).contains(&x) && (2..2 + k).contains(&y)).collect())
        .collect()
}

/// Any 2x2 window that is entirely foreground.
pub fn has_solid_2x2(g: &Grid) -> bool {
    (1..g.len()).any(|y| (1..g[0].len()).any(|x| g[y][x] && g[y - 1][x] && g[y][x - 1] && g[y - 1][x - 1]))
}

/// Random mask up to 64x64 with a fill density drawn per mask.
pub fn random_mask(rng: &mut impl Rng) -> Grid {
    let w = rng.random_range(1..=64);
    let h = rng.random_range(1..=64);
    let density: f64 = rng.random_range(0.01..0.99);
    (0..h).map(|_| (0..w).map(|_| rng.random_bool(density)).collect()).collect()
}
