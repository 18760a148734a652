use std::process::ExitCode;

use traitfuse::check::gradient_suite;
use traitfuse::Result;

use crate::GradcheckArgs;

pub fn gradcheck(args: &GradcheckArgs) -> Result<ExitCode> {
    let mut suite = gradient_suite(args.seeds, args.model_seeds)?;
    if let Some(tol) = args.tol {
        for c in &mut suite {
            c.tol = tol;
        }
    }
    println!("{:<22} {:>5} {:>10} {:>8}  result", "component", "cases", "worst", "tol");
    let mut failed = 0;
    for c in &suite {
        let ok = c.passed();
        failed += usize::from(!ok);
        println!(
            "{:<22} {:>5} {:>10.2e} {:>8.0e}  {}",
            c.component,
            c.cases,
            c.worst(),
            c.tol,
            if ok { "ok" } else { "FAIL" }
        );
        for p in &c.params {
            println!("    {:<34} {:>6} {:>10.2e}", p.name, p.numel, p.max_rel_err);
        }
    }
    if failed > 0 {
        eprintln!("{failed} component(s) exceeded tolerance");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}
