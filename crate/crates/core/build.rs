//! Compiles `font/glyphs.txt` into a static glyph table. A malformed table
//! fails the build.

use std::env;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

const ROWS: usize = 16;
const COLS: usize = 8;

fn parse_rows(lines: &[&str], header: &str) -> [u8; ROWS] {
    assert_eq!(lines.len(), ROWS, "glyph {header}: expected {ROWS} rows");
    let mut rows = [0u8; ROWS];
    for (y, line) in lines.iter().enumerate() {
        assert_eq!(line.len(), COLS, "glyph {header}: row {y} must have {COLS} cells");
        for (x, c) in line.chars().enumerate() {
            match c {
                '#' => rows[y] |= 1 << x,
                '.' => {}
                other => panic!("glyph {header}: invalid cell {other:?}"),
            }
        }
    }
    rows
}

fn main() {
    let table = Path::new("font/glyphs.txt");
    println!("cargo:rerun-if-changed={}", table.display());
    let text = fs::read_to_string(table).expect("font table readable");

    let lines: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') || (l.len() == COLS && l.chars().all(|c| c == '#' || c == '.')))
        .filter(|l| !l.trim().is_empty())
        .collect();

    let mut glyphs: Vec<(u32, [u8; ROWS])> = Vec::new();
    let mut notdef = None;
    let mut i = 0;
    while i < lines.len() {
        let header = lines[i];
        let rows = parse_rows(&lines[i + 1..(i + 1 + ROWS).min(lines.len())], header);
        if header == "NOTDEF" {
            assert!(rows.iter().any(|&r| r != 0), "NOTDEF must carry ink");
            notdef = Some(rows);
        } else {
            let hex = header
                .strip_prefix("U+")
                .and_then(|h| h.split_whitespace().next())
                .unwrap_or_else(|| panic!("bad glyph header {header:?}"));
            let cp = u32::from_str_radix(hex, 16).expect("hex codepoint");
            assert!(char::from_u32(cp).is_some(), "U+{cp:04X} is not a scalar value");
            let inked = rows.iter().any(|&r| r != 0);
            assert!(inked || cp == 0x20, "U+{cp:04X}: only the space glyph may be blank");
            if let Some(&(prev, _)) = glyphs.last() {
                assert!(cp > prev, "U+{cp:04X}: table must be sorted and unique");
            }
            glyphs.push((cp, rows));
        }
        i += 1 + ROWS;
    }
    let notdef = notdef.expect("font table must define NOTDEF");

    let mut out = String::new();
    writeln!(out, "pub(crate) const GLYPH_COUNT: usize = {};", glyphs.len()).unwrap();
    writeln!(out, "pub(crate) static NOTDEF_ROWS: [u8; 16] = {notdef:?};").unwrap();
    writeln!(out, "pub(crate) static GLYPH_TABLE: [(u32, [u8; 16]); {}] = [", glyphs.len()).unwrap();
    for (cp, rows) in &glyphs {
        writeln!(out, "    (0x{cp:04X}, {rows:?}),").unwrap();
    }
    writeln!(out, "];").unwrap();

    let dest = Path::new(&env::var("OUT_DIR").unwrap()).join("glyph_table.rs");
    fs::write(dest, out).unwrap();
}
