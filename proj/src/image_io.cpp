#include "latentmark/io/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>

#include "latentmark/core/check.hpp"

namespace latentmark::io {

namespace {

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    jmp_buf setjmp_buffer;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    longjmp(err->setjmp_buffer, 1);
}

}  // namespace

std::vector<unsigned char> jpeg_roundtrip_rgb8(const std::vector<unsigned char>& rgb, int width,
                                               int height, int quality) {
    check(quality >= 1 && quality <= 100, "jpeg: quality must be in [1,100]");
    check(rgb.size() == static_cast<size_t>(width) * height * 3, "jpeg: buffer size mismatch");

    // encode to memory
    jpeg_compress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    unsigned char* buf = nullptr;
    unsigned long buf_size = 0;
    if (setjmp(jerr.setjmp_buffer)) {
        jpeg_destroy_compress(&cinfo);
        if (buf) free(buf);
        throw IoError("jpeg encode failed");
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &buf, &buf_size);
    cinfo.image_width = static_cast<JDIMENSION>(width);
    cinfo.image_height = static_cast<JDIMENSION>(height);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        const JSAMPLE* row = rgb.data() + static_cast<size_t>(cinfo.next_scanline) * width * 3;
        JSAMPROW rows[1] = {const_cast<JSAMPROW>(row)};
        jpeg_write_scanlines(&cinfo, rows, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);

    // decode back
    jpeg_decompress_struct dinfo;
    JpegErrorMgr derr;
    dinfo.err = jpeg_std_error(&derr.pub);
    derr.pub.error_exit = jpeg_error_exit;
    std::vector<unsigned char> out(static_cast<size_t>(width) * height * 3);
    if (setjmp(derr.setjmp_buffer)) {
        jpeg_destroy_decompress(&dinfo);
        free(buf);
        throw IoError("jpeg decode failed");
    }
    jpeg_create_decompress(&dinfo);
    jpeg_mem_src(&dinfo, buf, buf_size);
    jpeg_read_header(&dinfo, TRUE);
    dinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&dinfo);
    while (dinfo.output_scanline < dinfo.output_height) {
        JSAMPROW rows[1] = {out.data() + static_cast<size_t>(dinfo.output_scanline) * width * 3};
        jpeg_read_scanlines(&dinfo, rows, 1);
    }
    jpeg_finish_decompress(&dinfo);
    jpeg_destroy_decompress(&dinfo);
    free(buf);
    return out;
}

std::vector<unsigned char> to_rgb8(const nn::Tensor<real_t>& img) {
    check_shape(img.rank() == 3 && img.dim(0) == 3, "to_rgb8: expected (3,H,W)");
    const int64_t H = img.dim(1), W = img.dim(2);
    std::vector<unsigned char> rgb(static_cast<size_t>(3 * H * W));
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x)
            for (int64_t c = 0; c < 3; ++c) {
                const double v = (static_cast<double>(img.at3(c, y, x)) + 1.0) * 127.5;
                rgb[static_cast<size_t>((y * W + x) * 3 + c)] =
                    static_cast<unsigned char>(std::clamp(v + 0.5, 0.0, 255.0));
            }
    return rgb;
}

nn::Tensor<real_t> from_rgb8(const std::vector<unsigned char>& rgb, int width, int height) {
    nn::Tensor<real_t> img({3, height, width});
    for (int64_t y = 0; y < height; ++y)
        for (int64_t x = 0; x < width; ++x)
            for (int64_t c = 0; c < 3; ++c)
                img.at3(c, y, x) = static_cast<real_t>(
                    static_cast<double>(rgb[static_cast<size_t>((y * width + x) * 3 + c)]) / 127.5 - 1.0);
    return img;
}

nn::Tensor<real_t> read_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("cannot open image: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError("failed to read png: " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    std::vector<unsigned char> rgb(static_cast<size_t>(w) * h * 3);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = rgb.data() + static_cast<size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return from_rgb8(rgb, static_cast<int>(w), static_cast<int>(h));
}

void write_png(const std::string& path, const nn::Tensor<real_t>& img) {
    const auto rgb = to_rgb8(img);
    const int64_t H = img.dim(1), W = img.dim(2);
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("cannot write image: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("failed to write png: " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(W), static_cast<png_uint_32>(H), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<size_t>(H));
    for (int64_t y = 0; y < H; ++y)
        rows[static_cast<size_t>(y)] = const_cast<png_bytep>(rgb.data() + static_cast<size_t>(y) * W * 3);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace latentmark::io
