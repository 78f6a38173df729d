//! Build zero-forcing beams on the default scenario and check the nulls and
//! the effective gains a (communication) and b (sensing).

use mpisac::beamform::{build_beamformers, SelectionVector};
use mpisac::channel::synthesize_channels_seeded;
use mpisac::scenario::default_scenario;

fn main() -> Result<(), mpisac::Error> {
    let scenario = default_scenario();
    let channels = synthesize_channels_seeded(&scenario, 0)?;
    let x: SelectionVector = "110010".parse().expect("valid bits");
    let beams = build_beamformers(&x, &channels)?;

    println!("selection {x} (1 = sensing)");
    println!("dfr  mode    a=|f^H w|    b=|g^H w|^2   worst leak");
    for i in 0..x.len() {
        let leak = (0..x.len())
            .filter(|&j| j != i)
            .map(|j| channels.h(i, j).dotc(&beams.w_zf[i]).norm() / channels.h(i, j).norm())
            .fold(0.0, f64::max);
        let mode = if x.is_sensing(i) { "sense" } else { "comm" };
        println!(
            "{i:>3}  {mode:<6}  {:.4e}   {:.4e}    {leak:.1e}",
            beams.a[i], beams.b[i]
        );
    }
    Ok(())
}
