use std::path::PathBuf;

use capfem::verification::{
    case_by_name, convergence_study, levels_for, Level, RateMode, StudyError, StudyOptions,
};

use crate::output::{rooted, write};
use crate::{CmdResult, Failure};

pub struct ConvergeArgs {
    pub case: String,
    pub mode: RateMode,
    pub levels: Vec<usize>,
    pub n: usize,
    pub final_time: f64,
    pub parallel: bool,
    pub out: PathBuf,
}

pub fn run(args: &ConvergeArgs) -> CmdResult {
    let case = case_by_name(&args.case).ok_or_else(|| {
        Failure::new(2, format!("unknown case `{}` (expected A or B)", args.case))
    })?;
    if args.levels.len() < 3 {
        return Err(Failure::new(
            2,
            format!(
                "a rate fit needs at least 3 levels, got {}",
                args.levels.len()
            ),
        ));
    }
    if !(args.final_time > 0.0 && args.final_time.is_finite()) {
        return Err(Failure::new(
            2,
            format!("final time {} must be > 0", args.final_time),
        ));
    }
    let levels: Vec<Level> = match args.mode {
        RateMode::Time => args
            .levels
            .iter()
            .map(|&steps| Level { n: args.n, steps })
            .collect(),
        mode => levels_for(&case, mode, &args.levels, args.final_time),
    };
    let opts = StudyOptions {
        final_time: args.final_time,
        parallel: args.parallel,
        ..StudyOptions::default()
    };
    let report = convergence_study(&case, &levels, args.mode, &opts).map_err(|e| match e {
        StudyError::TooFewLevels(_) | StudyError::InvalidLevels(_) => {
            Failure::new(2, e.to_string())
        }
        other => Failure::new(3, format!("convergence run failed: {other}")),
    })?;

    print!("{}", report.table());
    let path = rooted(&args.out).join(format!("convergence-{}-{}.txt", case.name, args.mode));
    write(&path, &report.to_structured())
        .map_err(|e| Failure::new(1, format!("{}: {e}", path.display())))?;
    println!("report: {}", path.display());
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::new(4, "rates outside their certification bands"))
    }
}
