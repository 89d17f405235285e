use serde::Serialize;
use wte_core::{achieved_power, min_sample_size, PowerSpec};

use crate::args::{PowerArgs, SidesArg};
use crate::estimate::to_json;
use crate::CliError;

#[derive(Serialize)]
struct PowerReport {
    schema_version: u32,
    command: &'static str,
    config: PowerSpec,
    n: u64,
    multiplier: f64,
    achieved_power: f64,
}

pub fn run(a: PowerArgs) -> Result<(), CliError> {
    let spec = PowerSpec { sigma2: a.sigma2, epsilon: a.epsilon, size: a.size, power: a.power, sided: a.sided.into() };
    let multiplier = spec.multiplier()?;
    let n = min_sample_size(&spec)?;
    let achieved = achieved_power(n, &spec)?;
    if a.json {
        let report = PowerReport { schema_version: 1, command: "power", config: spec, n, multiplier, achieved_power: achieved };
        print!("{}", to_json(&report)?);
        return Ok(());
    }
    println!("sigma2          {}", spec.sigma2);
    println!("epsilon         {}", spec.epsilon);
    println!("size            {}", spec.size);
    println!("target power    {}", spec.power);
    println!("sided           {}", match a.sided { SidesArg::One => "one", SidesArg::Two => "two" });
    println!("multiplier      {multiplier:.3}");
    println!("n               {n}");
    println!("achieved power  {achieved:.4}");
    Ok(())
}
