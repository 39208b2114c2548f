//! Array geometry: steering vectors, inter-microphone delays and JSON.

use subaoa::geometry::{MicArray, DEFAULT_CIRCULAR_RADIUS};

fn main() -> subaoa::Result<()> {
    let array = MicArray::circular(6, DEFAULT_CIRCULAR_RADIUS)?;
    println!("6-mic circular array, aperture {:.4} m", array.aperture());

    let f = 2000.0;
    for theta in [0.0, 45.0, 90.0] {
        let a = array.steering_vector(f, theta)?;
        let phases: Vec<String> = a
            .entries
            .iter()
            .map(|z| format!("{:+.2}", z.arg()))
            .collect();
        println!("theta {theta:>5.1} deg at {f} Hz: phases [{}] rad", phases.join(", "));
    }

    let pair = MicArray::uniform_linear(2, 0.1)?;
    let tdoa = pair.relative_delay(0, 0.0) - pair.relative_delay(1, 0.0);
    println!("2-mic pair 10 cm apart, endfire TDOA = {:.1} us", tdoa * 1e6);

    println!("{}", array.to_json_string());
    Ok(())
}
