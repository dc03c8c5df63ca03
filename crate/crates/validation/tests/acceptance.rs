use std::process::ExitCode;

fn main() -> ExitCode {
    let mut failed = 0;
    for id in vfd_validation::ids() {
        let c = vfd_validation::evaluate(id);
        println!("{}", c.line());
        if !c.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} of 14 criteria passed", 14 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
