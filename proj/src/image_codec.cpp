#include <algorithm>
#include <cstdio>
#include <csetjmp>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "solarscan/errors.hpp"
#include "solarscan/image.hpp"

namespace solarscan {

namespace {

RgbImage from_rgb8(const std::vector<unsigned char>& px, int w, int h) {
    RgbImage img(w, h);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        img.data[i] = static_cast<float>(px[i]) / 255.0f;
    }
    return img;
}

std::vector<unsigned char> to_rgb8(const RgbImage& img) {
    std::vector<unsigned char> px(img.data.size());
    for (std::size_t i = 0; i < px.size(); ++i) {
        float v = std::clamp(img.data[i], 0.0f, 1.0f);
        px[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    return px;
}

RgbImage decode_png(const std::string& path) {
    png_image pimg;
    std::memset(&pimg, 0, sizeof(pimg));
    pimg.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&pimg, path.c_str())) {
        throw FormatError("corrupt PNG: " + path + " (" + pimg.message + ")");
    }
    pimg.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> px(PNG_IMAGE_SIZE(pimg));
    if (!png_image_finish_read(&pimg, nullptr, px.data(), 0, nullptr)) {
        std::string msg = pimg.message;
        png_image_free(&pimg);
        throw FormatError("corrupt PNG: " + path + " (" + msg + ")");
    }
    return from_rgb8(px, static_cast<int>(pimg.width), static_cast<int>(pimg.height));
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX] = {0};
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

RgbImage decode_jpeg(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) {
        throw IoError("cannot open file: " + path);
    }
    jpeg_decompress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit;

    RgbImage img;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        std::fclose(f);
        throw FormatError(std::string("corrupt JPEG: ") + path + " (" + err.message + ")");
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    img = RgbImage(static_cast<int>(cinfo.output_width),
                   static_cast<int>(cinfo.output_height));
    std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        unsigned char* rowp = row.data();
        jpeg_read_scanlines(&cinfo, &rowp, 1);
        int y = static_cast<int>(cinfo.output_scanline) - 1;
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                img.at(y, x, c) = static_cast<float>(row[x * 3 + c]) / 255.0f;
            }
        }
    }
    jpeg_finish_decompress(&cinfo);
    // Truncated streams decode with fill data and a warning; reject them.
    bool corrupt = cinfo.err->num_warnings > 0;
    jpeg_destroy_decompress(&cinfo);
    std::fclose(f);
    if (corrupt) {
        throw FormatError("corrupt JPEG: " + path + " (truncated or damaged stream)");
    }
    return img;
}

}  // namespace

RgbImage load_image(const std::string& path) {
    std::vector<unsigned char> head;
    {
        std::ifstream f(path, std::ios::binary);
        if (!f) {
            throw IoError("cannot open file: " + path);
        }
        head.resize(8);
        f.read(reinterpret_cast<char*>(head.data()), 8);
        head.resize(static_cast<std::size_t>(f.gcount()));
    }
    static const unsigned char png_magic[4] = {0x89, 'P', 'N', 'G'};
    if (head.size() >= 4 && std::memcmp(head.data(), png_magic, 4) == 0) {
        return decode_png(path);
    }
    if (head.size() >= 2 && head[0] == 0xFF && head[1] == 0xD8) {
        return decode_jpeg(path);
    }
    throw FormatError("unsupported image format: " + path);
}

void save_png(const RgbImage& img, const std::string& path) {
    png_image pimg;
    std::memset(&pimg, 0, sizeof(pimg));
    pimg.version = PNG_IMAGE_VERSION;
    pimg.width = static_cast<png_uint_32>(img.width);
    pimg.height = static_cast<png_uint_32>(img.height);
    pimg.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> px = to_rgb8(img);
    if (!png_image_write_to_file(&pimg, path.c_str(), 0, px.data(), 0, nullptr)) {
        throw IoError(std::string("cannot write PNG: ") + path + " (" + pimg.message + ")");
    }
}

void save_jpeg(const RgbImage& img, const std::string& path, int quality) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) {
        throw IoError("cannot open file for writing: " + path);
    }
    jpeg_compress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        std::fclose(f);
        throw IoError(std::string("cannot write JPEG: ") + path + " (" + err.message + ")");
    }
    jpeg_create_compress(&cinfo);
    jpeg_stdio_dest(&cinfo, f);
    cinfo.image_width = static_cast<JDIMENSION>(img.width);
    cinfo.image_height = static_cast<JDIMENSION>(img.height);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    std::vector<unsigned char> px = to_rgb8(img);
    while (cinfo.next_scanline < cinfo.image_height) {
        unsigned char* rowp = px.data() + static_cast<std::size_t>(cinfo.next_scanline) * img.width * 3;
        jpeg_write_scanlines(&cinfo, &rowp, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    std::fclose(f);
}

}  // namespace solarscan
