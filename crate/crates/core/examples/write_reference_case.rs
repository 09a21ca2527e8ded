//! Writes the synthetic reference case to the directory given as the
//! first argument (default `fixtures/reference_case`).

fn main() -> std::io::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "fixtures/reference_case".into());
    uavforensics::synth::write_reference_case(std::path::Path::new(&dir))?;
    println!("wrote {dir}");
    Ok(())
}
