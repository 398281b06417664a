//! Regenerate the shipped surrogate cycles in `data/cycles`.

use std::path::Path;

fn main() -> lithos::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/cycles");
    lithos::harness::us06_like(2.0)?.write(dir.join("us06_like.csv"))?;
    lithos::harness::udds2_like(2.0)?.write(dir.join("udds2_like.csv"))?;
    Ok(())
}
