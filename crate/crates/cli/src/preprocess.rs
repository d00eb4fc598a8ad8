//! Bandpass-filters each patient's ECG, cuts context windows, and caches
//! them for training. Caches hold pre-filter windows; loaders drop the
//! all-missing ones.

use std::path::PathBuf;

use apnea_core::dataset::io::write_instance_cache;
use apnea_core::dataset::{build_windows, filter_null_windows, Recording};
use apnea_core::signal::butterworth_bandpass;

use crate::config::RunConfig;
use crate::data::{self, runtime};
use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    /// Dataset directory of native channel files.
    #[arg(long)]
    input: PathBuf,
    /// Directory for the window caches.
    #[arg(long)]
    output: PathBuf,
}

pub fn run(args: Args, cfg: RunConfig) -> Result<(), CliError> {
    let ids = data::discover_patients(&args.input)?;
    let bandpass = cfg.bandpass_spec();
    let window_s = cfg.windowing.window_s;
    data::ensure_dir(&args.output)?;

    let mut summary = String::from("patient_id,windows,kept\n");
    let (mut total, mut total_kept) = (0usize, 0usize);
    for id in &ids {
        let rec = data::load_patient_recording(&args.input, id)?;
        let ecg = butterworth_bandpass(&rec.ecg, &bandpass).map_err(runtime)?;
        let rec = Recording { ecg, ..rec };
        let windows = build_windows(&rec, window_s).map_err(runtime)?;
        if windows.is_empty() {
            eprintln!("warning: {id} is shorter than one {window_s} s window, skipped");
            summary.push_str(&format!("{id},0,0\n"));
            continue;
        }
        write_instance_cache(&windows, &data::channel_path(&args.output, id, data::WINDOWS_SUFFIX))
            .map_err(runtime)?;
        let n = windows.len();
        let kept = filter_null_windows(windows).len();
        summary.push_str(&format!("{id},{n},{kept}\n"));
        println!("{id}: {n} windows, {kept} with signal");
        total += n;
        total_kept += kept;
    }
    data::write_text(&args.output.join("windows.csv"), &summary)?;
    cfg.write_resolved(&args.output)?;
    println!("{} patients, {total} windows, {total_kept} kept", ids.len());
    Ok(())
}
