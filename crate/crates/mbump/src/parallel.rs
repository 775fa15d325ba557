//! Worker threads for census scans and suite runs. Work is split into
//! contiguous chunks and merged in order, so results do not depend on the
//! worker count.

use mbump_core::constants::{scan_max, Best, CubeFunctional};
use mbump_core::dyadic::CensusCube;

/// `scan_max` over `cubes` using up to `workers` threads.
pub fn par_scan_max<F: CubeFunctional + Sync + ?Sized>(
    f: &F,
    cubes: &[CensusCube],
    workers: usize,
) -> mbump_core::Result<Option<Best>> {
    let workers = workers.clamp(1, cubes.len().max(1));
    if workers == 1 {
        return scan_max(f, cubes, 0);
    }
    let chunk = cubes.len().div_ceil(workers);
    let parts: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = cubes
            .chunks(chunk)
            .enumerate()
            .map(|(i, c)| s.spawn(move || scan_max(f, c, i * chunk)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("scan worker panicked")).collect()
    });
    let mut best = None;
    for part in parts {
        best = Best::merge(best, part?);
    }
    Ok(best)
}

/// `items.map(f)` on up to `workers` threads, results in input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(move || c.iter().map(f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use mbump_core::constants::MatrixAp;
    use mbump_core::dyadic::{census_cubes, Census, Lattice};
    use mbump_core::weights::gen_random_field;

    #[test]
    fn worker_count_does_not_change_the_scan() {
        let w = gen_random_field(Lattice::new(1, 6).unwrap(), 2, 5, 20.0, 0.8).unwrap();
        let f = MatrixAp::new(&w, 2.0).unwrap();
        let cubes = census_cubes(w.lattice(), Census::Shifted);
        let serial = scan_max(&f, &cubes, 0).unwrap().unwrap();
        for workers in [2, 3, 7, 1000] {
            let b = par_scan_max(&f, &cubes, workers).unwrap().unwrap();
            assert_eq!((b.value.to_bits(), b.index), (serial.value.to_bits(), serial.index));
        }
    }

    #[test]
    fn par_map_keeps_order() {
        let xs: Vec<u32> = (0..37).collect();
        assert_eq!(par_map(&xs, 5, |x| x * x), xs.iter().map(|x| x * x).collect::<Vec<_>>());
    }
}
