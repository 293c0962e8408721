use super::lattice::{LogProbLattice, BLANK};

/// Best-path decoding: per-frame argmax (ties go to the lowest index),
/// collapse adjacent repeats, drop blanks.
pub fn ctc_greedy(lattice: &LogProbLattice) -> Vec<usize> {
    let path: Vec<usize> = (0..lattice.frames())
        .map(|t| {
            let row = lattice.row(t);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    collapse_path(&path)
}

/// Maps a frame-level alignment to its label sequence.
pub fn collapse_path(path: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &k in path {
        if Some(k) != prev && k != BLANK {
            out.push(k);
        }
        prev = Some(k);
    }
    out
}
