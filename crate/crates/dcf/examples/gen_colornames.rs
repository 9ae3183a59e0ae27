//! Writes the generated Color Names table to `assets/colornames.bin`, or to
//! the path given as the first argument.

use deform_dcf::assets::{bundled_assets_dir, save_colornames, COLORNAMES_FILE};
use deform_dcf::core::features::ColorNamesTable;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args_os().nth(1).map_or_else(|| bundled_assets_dir().join(COLORNAMES_FILE), Into::into);
    save_colornames(&path, &ColorNamesTable::generated())?;
    println!("wrote {}", path.display());
    Ok(())
}
