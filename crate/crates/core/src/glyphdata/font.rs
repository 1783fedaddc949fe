//! Embedded bitmap font: 36 standard 5×7 glyphs (A–Z, 0–9) plus 8 dense
//! 7×7 "complex" glyphs addressed by the characters `a`–`h`.

pub const GLYPH_HEIGHT: usize = 7;
pub const STANDARD_WIDTH: usize = 5;
pub const COMPLEX_WIDTH: usize = 7;

/// The 36-class alphabet.
pub const STANDARD_ALPHABET: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

/// Complex glyph stand-ins; each is a dense 7×7 pattern.
pub const COMPLEX_ALPHABET: &str = "abcdefgh";

/// Sixteen standard glyphs with the lowest worst-case pairwise template
/// correlation; the default toy-corpus class set.
pub const TOY16_ALPHABET: &str = "134679CJKLMPQSUY";

const STANDARD_ROWS: [[&str; 7]; 36] = [
    ["01110", "10001", "10001", "11111", "10001", "10001", "10001"], // A
    ["11110", "10001", "10001", "11110", "10001", "10001", "11110"], // B
    ["01110", "10001", "10000", "10000", "10000", "10001", "01110"], // C
    ["11100", "10010", "10001", "10001", "10001", "10010", "11100"], // D
    ["11111", "10000", "10000", "11110", "10000", "10000", "11111"], // E
    ["11111", "10000", "10000", "11110", "10000", "10000", "10000"], // F
    ["01110", "10001", "10000", "10111", "10001", "10001", "01111"], // G
    ["10001", "10001", "10001", "11111", "10001", "10001", "10001"], // H
    ["01110", "00100", "00100", "00100", "00100", "00100", "01110"], // I
    ["00111", "00010", "00010", "00010", "00010", "10010", "01100"], // J
    ["10001", "10010", "10100", "11000", "10100", "10010", "10001"], // K
    ["10000", "10000", "10000", "10000", "10000", "10000", "11111"], // L
    ["10001", "11011", "10101", "10101", "10001", "10001", "10001"], // M
    ["10001", "10001", "11001", "10101", "10011", "10001", "10001"], // N
    ["01110", "10001", "10001", "10001", "10001", "10001", "01110"], // O
    ["11110", "10001", "10001", "11110", "10000", "10000", "10000"], // P
    ["01110", "10001", "10001", "10001", "10101", "10010", "01101"], // Q
    ["11110", "10001", "10001", "11110", "10100", "10010", "10001"], // R
    ["01111", "10000", "10000", "01110", "00001", "00001", "11110"], // S
    ["11111", "00100", "00100", "00100", "00100", "00100", "00100"], // T
    ["10001", "10001", "10001", "10001", "10001", "10001", "01110"], // U
    ["10001", "10001", "10001", "10001", "10001", "01010", "00100"], // V
    ["10001", "10001", "10001", "10101", "10101", "10101", "01010"], // W
    ["10001", "10001", "01010", "00100", "01010", "10001", "10001"], // X
    ["10001", "10001", "10001", "01010", "00100", "00100", "00100"], // Y
    ["11111", "00001", "00010", "00100", "01000", "10000", "11111"], // Z
    ["01110", "10001", "10011", "10101", "11001", "10001", "01110"], // 0
    ["00100", "01100", "00100", "00100", "00100", "00100", "01110"], // 1
    ["01110", "10001", "00001", "00010", "00100", "01000", "11111"], // 2
    ["11111", "00010", "00100", "00010", "00001", "10001", "01110"], // 3
    ["00010", "00110", "01010", "10010", "11111", "00010", "00010"], // 4
    ["11111", "10000", "11110", "00001", "00001", "10001", "01110"], // 5
    ["00110", "01000", "10000", "11110", "10001", "10001", "01110"], // 6
    ["11111", "00001", "00010", "00100", "01000", "01000", "01000"], // 7
    ["01110", "10001", "10001", "01110", "10001", "10001", "01110"], // 8
    ["01110", "10001", "10001", "01111", "00001", "00010", "01100"], // 9
];

const COMPLEX_ROWS: [[&str; 7]; 8] = [
    ["0001101", "0011111", "1000001", "1011110", "0111110", "1110110", "1000111"],
    ["1100110", "1001100", "1010011", "0100101", "1111001", "1010110", "0010101"],
    ["1100111", "1111100", "1101111", "0110011", "0101000", "0111011", "1001100"],
    ["0000010", "1000111", "1011101", "0011001", "0001101", "1010101", "0111110"],
    ["1000001", "1111101", "1110111", "1111101", "0110100", "0100010", "0111000"],
    ["0000001", "1100100", "1111110", "1000110", "1100110", "1010111", "0011001"],
    ["0101110", "1001010", "0001010", "0011001", "0110111", "1110000", "1111011"],
    ["1011100", "1111001", "1100001", "0101101", "1101111", "1110100", "1101010"],
];

/// One glyph bitmap, row-major, `true` = stroke.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bitmap {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Bitmap {
    fn from_rows(rows: &[&str]) -> Self {
        let width = rows[0].len();
        let bits = rows
            .iter()
            .flat_map(|r| r.bytes().map(|b| b == b'1'))
            .collect();
        Bitmap {
            width,
            height: rows.len(),
            bits,
        }
    }

    pub fn at(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

pub fn is_supported(ch: char) -> bool {
    STANDARD_ALPHABET.contains(ch) || COMPLEX_ALPHABET.contains(ch)
}

pub fn is_complex(ch: char) -> bool {
    COMPLEX_ALPHABET.contains(ch)
}

pub fn glyph(ch: char) -> Option<Bitmap> {
    if let Some(i) = STANDARD_ALPHABET.find(ch) {
        return Some(Bitmap::from_rows(&STANDARD_ROWS[i]));
    }
    COMPLEX_ALPHABET
        .find(ch)
        .map(|i| Bitmap::from_rows(&COMPLEX_ROWS[i]))
}

/// Unscaled glyph width.
pub fn glyph_width(ch: char) -> usize {
    if is_complex(ch) {
        COMPLEX_WIDTH
    } else {
        STANDARD_WIDTH
    }
}

/// Global class id over the full 44-symbol table (standard then complex).
pub fn class_id(ch: char) -> Option<usize> {
    STANDARD_ALPHABET
        .find(ch)
        .or_else(|| COMPLEX_ALPHABET.find(ch).map(|i| i + 36))
}

pub const NUM_CLASSES: usize = 44;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_well_formed() {
        for ch in STANDARD_ALPHABET.chars().chain(COMPLEX_ALPHABET.chars()) {
            let g = glyph(ch).unwrap();
            assert_eq!(g.height, GLYPH_HEIGHT);
            assert_eq!(g.width, glyph_width(ch));
            assert_eq!(g.bits.len(), g.width * g.height);
            assert!(g.bits.iter().any(|&b| b));
        }
        assert!(TOY16_ALPHABET.chars().all(|c| STANDARD_ALPHABET.contains(c)));
        assert_eq!(TOY16_ALPHABET.len(), 16);
        assert_eq!(class_id('A'), Some(0));
        assert_eq!(class_id('9'), Some(35));
        assert_eq!(class_id('h'), Some(43));
        assert_eq!(class_id('!'), None);
    }

    #[test]
    fn glyphs_are_distinct() {
        let all: Vec<Bitmap> = STANDARD_ALPHABET.chars().map(|c| glyph(c).unwrap()).collect();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                assert_ne!(all[i], all[j]);
            }
        }
    }
}
