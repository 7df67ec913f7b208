//! A reported accuracy table over seven stream benchmarks and nine
//! algorithms, with its reported average-rank row.

pub const ALGORITHMS: [&str; 9] = ["LTM", "ARF", "BOLE", "LevBag", "SRP", "EFDT", "VFDT", "NC", "MC"];

pub const DATASETS: [&str; 7] = ["NOAA", "METER", "ELEC", "RIALTO", "POSTURE", "COVER", "POKER"];

pub const ACCURACY: [[f64; 9]; 7] = [
    [81.29, 78.36, 73.45, 75.51, 78.35, 72.34, 70.86, 68.03, 68.62],
    [73.62, 68.02, 67.28, 63.17, 69.69, 57.94, 52.07, 1.08, 8.22],
    [91.82, 87.89, 90.17, 85.86, 88.70, 77.96, 77.87, 85.30, 57.41],
    [79.03, 67.95, 47.27, 60.99, 75.12, 55.79, 28.68, 0.00, 10.00],
    [59.72, 59.14, 48.28, 55.44, 58.14, 48.91, 52.99, 20.07, 27.29],
    [95.53, 91.75, 93.33, 85.26, 94.54, 82.38, 76.98, 95.06, 48.76],
    [97.51, 89.17, 80.01, 88.52, 87.58, 77.38, 77.43, 74.54, 50.11],
];

pub const REPORTED_RANKS: [f64; 9] = [1.00, 2.86, 4.57, 4.29, 2.71, 6.00, 6.57, 7.43, 8.43];

pub fn rows() -> Vec<Vec<f64>> {
    ACCURACY.iter().map(|r| r.to_vec()).collect()
}

/// Columns of the six tree and ensemble stream learners.
pub const STREAM_LEARNERS: std::ops::RangeInclusive<usize> = 1..=6;

/// Ranks in which NC is left out of the pool when ranking the six stream
/// learners, while LTM, NC and MC are ranked against all nine. The reported
/// row comes out under this reading and no other we tried.
pub fn ranks_without_nc_for_stream_learners() -> Vec<f64> {
    const NC: usize = 7;
    let mut total = [0.0; 9];
    for row in &ACCURACY {
        for (j, &v) in row.iter().enumerate() {
            let pool: Vec<f64> = row
                .iter()
                .enumerate()
                .filter(|&(i, _)| !STREAM_LEARNERS.contains(&j) || i != NC)
                .map(|(_, &x)| x)
                .collect();
            let above = pool.iter().filter(|&&x| x > v).count() as f64;
            let equal = pool.iter().filter(|&&x| x == v).count() as f64;
            total[j] += above + (equal + 1.0) / 2.0;
        }
    }
    total.iter().map(|t| t / ACCURACY.len() as f64).collect()
}
