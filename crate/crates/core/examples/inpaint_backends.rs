//! Runs the same masked frame through every inpainter: ground-truth oracle,
//! flat fill, and a remote service (a tiny local HTTP server that answers
//! with the color-inverted input).

use std::error::Error;
use std::thread;

use serde_json::{json, Value};
use splatfill::backends::remote::{decode_b64, encode_b64};
use splatfill::backends::{InpainterBackend, RemoteEndpoint, INPAINT_ROUTE};
use splatfill::io::png::{decode_rgb, encode_rgb};
use splatfill::{io, ImageBuffer, MaskBuffer};

/// Serves `/v1/inpaint` by inverting the posted image. Runs until the
/// process exits; returns the base URL.
pub fn spawn_inverting_service() -> Result<String, Box<dyn Error>> {
    let server = tiny_http::Server::http("127.0.0.1:0").map_err(|e| e.to_string())?;
    let url = format!("http://{}", server.server_addr());
    thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let reply = (|| -> Result<String, Box<dyn Error>> {
                if req.url() != INPAINT_ROUTE {
                    return Err("unknown route".into());
                }
                let body: Value = serde_json::from_reader(req.as_reader())?;
                let img = decode_rgb(&decode_b64(body["image"].as_str().ok_or("no image")?)?)?;
                let inv = ImageBuffer::from_fn(img.width(), img.height(), |x, y| img.pixel(x, y).map(|v| 1.0 - v));
                Ok(json!({ "image": encode_b64(&encode_rgb(&inv)?) }).to_string())
            })();
            let resp = match reply {
                Ok(text) => tiny_http::Response::from_string(text),
                Err(e) => tiny_http::Response::from_string(e.to_string()).with_status_code(400),
            };
            let _ = req.respond(resp);
        }
    });
    Ok(url)
}

pub struct InpaintRun {
    pub name: &'static str,
    pub out: ImageBuffer,
}

pub fn run_example() -> Result<(ImageBuffer, MaskBuffer, Vec<InpaintRun>), Box<dyn Error>> {
    let (w, h) = (24, 16);
    let image = ImageBuffer::from_fn(w, h, |x, y| [x as f64 / w as f64, y as f64 / h as f64, 0.4]);
    // left two thirds observed
    let mask = MaskBuffer::from_fn(w, h, |x, _| x < 2 * w / 3);

    let gt_dir = tempfile::tempdir()?;
    io::save_png(&ImageBuffer::filled(w, h, [0.2, 0.8, 0.2]), &gt_dir.path().join("gt_1.png"))?;
    let backends = [
        ("oracle-directory", InpainterBackend::oracle_directory(gt_dir.path())?),
        ("flat-fill", InpainterBackend::FlatFill),
        ("remote", InpainterBackend::Remote(RemoteEndpoint::new(spawn_inverting_service()?).with_timeout(10.0))),
    ];
    let mut runs = Vec::new();
    for (name, b) in backends {
        runs.push(InpaintRun {
            name,
            out: b.inpaint(&image, &mask, "a gradient", 1)?,
        });
    }
    Ok((image, mask, runs))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    let (image, mask, runs) = run_example()?;
    for r in &runs {
        let kept = (0..image.height())
            .flat_map(|y| (0..image.width()).map(move |x| (x, y)))
            .filter(|&(x, y)| mask.get(x, y))
            .all(|(x, y)| r.out.pixel(x, y) == image.pixel(x, y));
        let (x, y) = (image.width() - 1, image.height() / 2);
        println!(
            "{:<17} observed pixels untouched: {kept}; filled pixel ({x},{y}) = {:.3?}",
            r.name,
            r.out.pixel(x, y)
        );
    }
    Ok(())
}
