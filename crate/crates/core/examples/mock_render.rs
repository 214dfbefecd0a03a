//! Render a genome through the procedural mock backend and the render cache.
//!
//! cargo run -p ganimals-core --example mock_render -- out.png

use ganimals_core::render::png_dimensions;
use ganimals_core::{
    GeneratorBackend, Genome, MemoryImageStore, MockBackend, RenderCache, RenderRequest,
    RetryPolicy, Taxonomy,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let taxonomy = Taxonomy::bundled();
    let genome = Genome::pair(&taxonomy, 207, 1, 0.5, 99)?;
    let backend = MockBackend::default();
    println!("backend model: {}", backend.capabilities().model);

    let request = RenderRequest::from_genome(&genome, 128);
    println!("wire request: {}", request.to_wire());

    let cache = RenderCache::new(128, RetryPolicy::default());
    let store = MemoryImageStore::new();
    let first = cache.render_cached(&backend, &store, &genome)?;
    let again = cache.render_cached(&backend, &store, &genome)?;
    println!("image {} ({}x{})", first.uri, first.width, first.height);
    println!("second render served from cache: {}", first == again);

    let png = backend.render(&request)?.png;
    println!("png is {} bytes, {:?}", png.len(), png_dimensions(&png)?);
    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, &png)?;
        println!("wrote {path}");
    }
    Ok(())
}
