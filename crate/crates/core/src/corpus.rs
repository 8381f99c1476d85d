//! Corpus input: UTF-8 text, one sequence per line.

use std::fs;
use std::path::Path;
use std::thread;

use crate::error::{Error, Result};
use crate::raster::FontAtlas;
use crate::render::{render, PatchSequence, RenderConfig};

/// Splits `text` into lines, tolerating CRLF endings.
pub fn lines(text: &str) -> Vec<String> {
    text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l).to_string()).collect()
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let bytes = fs::read(path.as_ref())?;
    let text = String::from_utf8(bytes)
        .map_err(|e| Error::format("corpus", format!("{}: not UTF-8 ({e})", path.as_ref().display())))?;
    Ok(lines(&text))
}

/// Applies `f` to every item on up to `workers` threads, preserving order.
pub fn map_sharded<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.max(1);
    if workers == 1 || items.len() < 2 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    thread::scope(|scope| {
        let handles: Vec<_> =
            items.chunks(chunk).map(|part| scope.spawn(|| part.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Renders every line, sharding across `workers` threads. Output order
/// matches input order regardless of the worker count.
pub fn render_all<S: AsRef<str> + Sync>(
    lines: &[S],
    cfg: &RenderConfig,
    font: &FontAtlas,
    workers: usize,
) -> Result<Vec<PatchSequence>> {
    cfg.validate()?;
    map_sharded(lines, workers, |l| render(l.as_ref(), cfg, font)).into_iter().collect()
}
