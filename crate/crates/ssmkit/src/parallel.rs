//! Threaded invariance-error driver.
//!
//! Launch angles are split round-robin over scoped worker threads. Results
//! are written back by index and reduced in launch order, so the output
//! does not depend on the thread count.

use std::num::NonZeroUsize;
use std::thread;

use ssmkit_core::validation::{aggregate, launch_angles, trajectory_distance, InvarianceOptions, TrajectoryDistance};
use ssmkit_core::{to_polar, FirstOrderSystem, InvarianceResult, SsmError, SsmExpansion};

/// Worker count from `--threads`, `SSMKIT_THREADS` (via clap) or the
/// machine's available parallelism.
pub fn resolve_threads(requested: Option<usize>) -> usize {
    match requested {
        Some(t) if t > 0 => t,
        _ => thread::available_parallelism().map_or(1, NonZeroUsize::get),
    }
}

/// Same result as [`ssmkit_core::invariance_error`], computed on up to
/// `threads` workers.
pub fn invariance_error(
    fos: &FirstOrderSystem,
    ssm: &SsmExpansion,
    opts: &InvarianceOptions,
    threads: usize,
) -> Result<InvarianceResult, SsmError> {
    let pd = to_polar(ssm)?;
    let angles = launch_angles(opts.n_traj, opts.jitter_seed);
    let workers = threads.clamp(1, angles.len().max(1));
    let mut slots: Vec<Option<Result<TrajectoryDistance, SsmError>>> = vec![None; angles.len()];
    if workers == 1 {
        for (slot, &th) in slots.iter_mut().zip(&angles) {
            *slot = Some(trajectory_distance(fos, ssm, &pd, th, opts));
        }
    } else {
        let pd = &pd;
        let angles = &angles;
        let parts: Vec<Vec<(usize, Result<TrajectoryDistance, SsmError>)>> = thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    s.spawn(move || {
                        (w..angles.len())
                            .step_by(workers)
                            .map(|k| (k, trajectory_distance(fos, ssm, pd, angles[k], opts)))
                            .collect()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("invariance worker panicked"))
                .collect()
        });
        for (k, r) in parts.into_iter().flatten() {
            slots[k] = Some(r);
        }
    }
    // The first failure in launch order wins, independent of scheduling.
    let runs = slots
        .into_iter()
        .map(|s| s.expect("every launch angle is assigned"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(ssm.order, opts, &runs))
}
