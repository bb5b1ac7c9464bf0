use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{export_sdpa, import_solution, verify, ConicProgram, Solution};
use crate::error::{Error, Result};

/// Environment variable holding the path of an SDPA-compatible executable.
pub const SOLVER_ENV: &str = "ARROWSOS_SDP_SOLVER";

static COUNTER: AtomicUsize = AtomicUsize::new(0);

/// External solver invoked as `<exe> <input.dat-s> <output>`.
#[derive(Clone, Debug)]
pub struct ExternalSolver {
    pub executable: PathBuf,
}

impl ExternalSolver {
    /// Reads the executable path from [`SOLVER_ENV`].
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(SOLVER_ENV) {
            Some(p) if !p.is_empty() => Ok(ExternalSolver { executable: PathBuf::from(p) }),
            _ => Err(Error::BackendUnavailable(format!("{SOLVER_ENV} is not set"))),
        }
    }

    pub(super) fn solve(&self, program: &ConicProgram) -> Result<Solution> {
        let dir = std::env::temp_dir().join(format!(
            "arrowsos-{}-{}",
            std::process::id(),
            COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::create_dir_all(&dir)?;
        let input = dir.join("in.dat-s");
        let output = dir.join("out");
        std::fs::write(&input, export_sdpa(program))?;
        let status = Command::new(&self.executable)
            .arg(&input)
            .arg(&output)
            .output()
            .map_err(|e| Error::BackendUnavailable(format!("{}: {e}", self.executable.display())))?;
        let text = std::fs::read_to_string(&output).map_err(|e| {
            Error::NumericalFailure(format!("solver exited with {} and left no output: {e}", status.status))
        })?;
        let _ = std::fs::remove_dir_all(&dir);
        let mut sol = import_solution(&text)?;
        if sol.z.len() != program.n_vars {
            return Err(Error::Parse {
                line: 0,
                msg: format!("solution has {} entries, program has {}", sol.z.len(), program.n_vars),
            });
        }
        sol.block_min_eigs = verify(program, &sol.z)?.block_min_eigs;
        Ok(sol)
    }
}
