use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};

/// Largest width or height accepted by [`Image::decode`].
pub const MAX_DECODE_DIM: u32 = 8192;

/// 8-bit image, row-major, interleaved. Color images are stored B, G, R.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::shape("image buffer", width * height * channels, data.len()));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Self {
        Image::new(width, height, channels, vec![value; width * height * channels])
            .expect("channel count is 1 or 3")
    }

    /// Builds an image by evaluating `f(x, y, channel)` per sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Image::new(width, height, channels, data).expect("channel count is 1 or 3")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub(crate) fn ensure_non_empty(&self, op: &str) -> Result<()> {
        if self.is_empty() {
            return Err(Error::invalid(format!("{op}: empty image")));
        }
        Ok(())
    }

    pub(crate) fn ensure_color(&self, op: &str) -> Result<()> {
        self.ensure_non_empty(op)?;
        if self.channels != 3 {
            return Err(Error::invalid(format!(
                "{op}: expected a 3-channel BGR image, got {} channel(s)",
                self.channels
            )));
        }
        Ok(())
    }

    /// Decodes PNG/JPEG bytes into a BGR (or grayscale) image. Headers
    /// claiming more than `MAX_DECODE_DIM` on a side are rejected before any
    /// pixel buffer is allocated.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut reader = image::ImageReader::new(Cursor::new(bytes))
            .with_guessed_format()
            .map_err(|e| Error::format("image", e.to_string()))?;
        let mut limits = image::Limits::default();
        limits.max_image_width = Some(MAX_DECODE_DIM);
        limits.max_image_height = Some(MAX_DECODE_DIM);
        limits.max_alloc = Some(MAX_DECODE_DIM as u64 * MAX_DECODE_DIM as u64 * 4);
        reader.limits(limits);
        Ok(Self::from_dynamic(reader.decode()?))
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }

    fn from_dynamic(img: image::DynamicImage) -> Self {
        if img.color().channel_count() == 1 {
            let g = img.into_luma8();
            let (w, h) = g.dimensions();
            return Image::new(w as usize, h as usize, 1, g.into_raw()).expect("luma buffer");
        }
        let rgb = img.into_rgb8();
        let (w, h) = rgb.dimensions();
        let mut data = rgb.into_raw();
        for px in data.chunks_exact_mut(3) {
            px.swap(0, 2);
        }
        Image::new(w as usize, h as usize, 3, data).expect("rgb buffer")
    }

    fn to_dynamic(&self) -> image::DynamicImage {
        let (w, h) = (self.width as u32, self.height as u32);
        if self.channels == 1 {
            let buf = image::GrayImage::from_raw(w, h, self.data.clone()).expect("gray buffer");
            return image::DynamicImage::ImageLuma8(buf);
        }
        let mut data = self.data.clone();
        for px in data.chunks_exact_mut(3) {
            px.swap(0, 2);
        }
        image::DynamicImage::ImageRgb8(image::RgbImage::from_raw(w, h, data).expect("rgb buffer"))
    }

    /// Writes PNG or JPEG depending on the file extension.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_dynamic().save(path.as_ref())?;
        Ok(())
    }

    pub fn encode_jpeg(&self, quality: u8) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        let encoder = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut out, quality);
        self.to_dynamic().write_with_encoder(encoder)?;
        Ok(out)
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = std::io::Cursor::new(Vec::new());
        self.to_dynamic().write_to(&mut out, image::ImageFormat::Png)?;
        Ok(out.into_inner())
    }
}
