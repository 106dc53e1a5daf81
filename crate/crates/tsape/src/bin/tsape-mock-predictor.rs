//! Wire-protocol server around a closed-form nearest-centroid model, for
//! testing the external predictor path without another language runtime.

use std::io::{self, BufReader, Write};
use std::net::TcpListener;
use std::process::ExitCode;
use std::sync::Arc;
use std::thread;

use clap::Parser;
use tsape::mock::{mock_model, Fault, Faulty};
use tsape::protocol::serve;

#[derive(Parser)]
#[command(name = "tsape-mock-predictor")]
struct Args {
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long)]
    length: usize,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value_t = 64)]
    batch_limit: usize,
    /// Listen on this address instead of stdio; prints `listening <addr>`.
    #[arg(long)]
    tcp: Option<String>,
    #[arg(long, default_value = "none")]
    fault: Fault,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.classes < 2
        || args.length == 0
        || args.batch_limit == 0
        || args.temperature.is_nan()
        || args.temperature <= 0.0
    {
        eprintln!("need --classes >= 2, --length >= 1, --batch-limit >= 1, --temperature > 0");
        return ExitCode::from(1);
    }
    let model = Arc::new(Faulty::new(
        mock_model(args.classes, args.length, args.temperature),
        args.fault,
        args.batch_limit,
    ));
    let result = match &args.tcp {
        None => serve(io::stdin().lock(), io::stdout().lock(), model.as_ref()).map(|_| ()),
        Some(addr) => listen(addr, model),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tsape-mock-predictor: {e}");
            ExitCode::from(3)
        }
    }
}

fn listen(addr: &str, model: Arc<Faulty<tsape_core::predict::CentroidModel>>) -> io::Result<()> {
    let listener = TcpListener::bind(addr)?;
    let mut out = io::stdout().lock();
    writeln!(out, "listening {}", listener.local_addr()?)?;
    out.flush()?;
    drop(out);
    for stream in listener.incoming() {
        let stream = stream?;
        let model = Arc::clone(&model);
        thread::spawn(move || {
            let reader = BufReader::new(stream.try_clone()?);
            serve(reader, stream, model.as_ref()).map(|_| ())
        });
    }
    Ok(())
}
