#include "dsatlas/nifti.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>

#include "dsatlas/error.hpp"
#include "dsatlas/io_util.hpp"

namespace dsatlas {

namespace {

constexpr int kHeaderSize = 348;

template <typename T>
T read_le(const std::uint8_t* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));  // little-endian host assumed (checked via dim[0])
    return v;
}

template <typename T>
void write_le(std::vector<std::uint8_t>& buf, std::size_t off, T v) {
    std::memcpy(buf.data() + off, &v, sizeof(T));
}

}  // namespace

LabelVolume read_nifti(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() < kHeaderSize) throw Error("NIfTI header truncated: " + path);
    const std::uint8_t* h = bytes.data();

    if (read_le<std::int32_t>(h + 0) != kHeaderSize)
        throw Error("bad sizeof_hdr (not 348): not a little-endian NIfTI-1 file: " + path);

    char magic[4];
    std::memcpy(magic, h + 344, 4);
    const bool single = std::memcmp(magic, "n+1", 4) == 0;
    const bool pair = std::memcmp(magic, "ni1", 4) == 0;
    if (!single && !pair) throw Error("bad magic (need n+1 or ni1): " + path);

    std::int16_t dim[8];
    for (int i = 0; i < 8; ++i) dim[i] = read_le<std::int16_t>(h + 40 + 2 * i);
    if (dim[0] < 1 || dim[0] > 7)
        throw Error("dim[0] out of 1..7: big-endian or corrupt header: " + path);
    if (dim[0] != 3) throw Error("non-3D NIfTI volume (dim[0] != 3): " + path);
    const int nx = dim[1], ny = dim[2], nz = dim[3];
    if (nx < 1 || ny < 1 || nz < 1) throw Error("non-positive NIfTI extent: " + path);

    const std::int16_t datatype = read_le<std::int16_t>(h + 70);
    const std::int16_t bitpix = read_le<std::int16_t>(h + 72);
    int expect_bitpix;
    switch (datatype) {
        case 2: expect_bitpix = 8; break;    // uint8
        case 4: expect_bitpix = 16; break;   // int16
        case 16: expect_bitpix = 32; break;  // float32
        case 512: expect_bitpix = 16; break; // uint16
        default: throw Error("unsupported NIfTI datatype " + std::to_string(datatype) + ": " + path);
    }
    if (bitpix != expect_bitpix) throw Error("bitpix inconsistent with datatype: " + path);

    float pixdim[8];
    for (int i = 0; i < 8; ++i) pixdim[i] = read_le<float>(h + 76 + 4 * i);
    for (int a = 1; a <= 3; ++a)
        if (!(pixdim[a] > 0.f) || !std::isfinite(pixdim[a]))
            throw Error("non-positive pixdim: " + path);

    const float vox_offset = read_le<float>(h + 108);
    const std::int16_t qform_code = read_le<std::int16_t>(h + 252);

    LabelVolume vol({nx, ny, nz}, {pixdim[1], pixdim[2], pixdim[3]});
    if (qform_code > 0) {
        vol.origin = {read_le<float>(h + 268), read_le<float>(h + 272), read_le<float>(h + 276)};
    }

    // payload: same file for n+1, sibling .img for ni1
    std::vector<std::uint8_t> payload_storage;
    const std::uint8_t* payload = nullptr;
    std::size_t payload_avail = 0;
    if (single) {
        const std::size_t off = std::max<std::size_t>(kHeaderSize, std::size_t(vox_offset));
        if (off > bytes.size()) throw Error("truncated payload: " + path);
        payload = bytes.data() + off;
        payload_avail = bytes.size() - off;
    } else {
        std::filesystem::path img_path(path);
        img_path.replace_extension(".img");
        payload_storage = read_file_bytes(img_path.string());
        const std::size_t off = std::size_t(std::max(0.f, vox_offset));
        if (off > payload_storage.size()) throw Error("truncated payload: " + path);
        payload = payload_storage.data() + off;
        payload_avail = payload_storage.size() - off;
    }

    const std::size_t nvox = vol.size();
    const std::size_t need = nvox * std::size_t(bitpix / 8);
    if (payload_avail < need) throw Error("truncated payload: " + path);

    switch (datatype) {
        case 2:
            for (std::size_t i = 0; i < nvox; ++i) vol.data[i] = payload[i];
            break;
        case 4:
            for (std::size_t i = 0; i < nvox; ++i) {
                const std::int16_t v = read_le<std::int16_t>(payload + 2 * i);
                if (v < 0) throw Error("negative label in volume: " + path);
                vol.data[i] = v;
            }
            break;
        case 512:
            for (std::size_t i = 0; i < nvox; ++i)
                vol.data[i] = read_le<std::uint16_t>(payload + 2 * i);
            break;
        case 16:
            for (std::size_t i = 0; i < nvox; ++i) {
                const float v = read_le<float>(payload + 4 * i);
                if (!std::isfinite(v)) throw Error("non-finite voxel value: " + path);
                const long r = std::lround(v);
                if (r < 0) throw Error("negative label in volume: " + path);
                vol.data[i] = std::int32_t(r);
            }
            break;
    }
    return vol;
}

void write_nifti(const LabelVolume& vol, const std::string& path) {
    vol.validate();
    for (std::int32_t v : vol.data)
        if (v > 0xFFFF) throw Error("label exceeds uint16 range");

    const std::size_t nvox = vol.size();
    std::vector<std::uint8_t> out(352 + nvox * 2, 0);
    write_le<std::int32_t>(out, 0, kHeaderSize);
    const std::int16_t dim[8] = {3, std::int16_t(vol.dims[0]), std::int16_t(vol.dims[1]),
                                 std::int16_t(vol.dims[2]), 1, 1, 1, 1};
    for (int i = 0; i < 8; ++i) write_le<std::int16_t>(out, 40 + 2 * i, dim[i]);
    write_le<std::int16_t>(out, 70, 512);  // uint16
    write_le<std::int16_t>(out, 72, 16);
    const float pixdim[8] = {1.f, float(vol.spacing[0]), float(vol.spacing[1]),
                             float(vol.spacing[2]), 0.f, 0.f, 0.f, 0.f};
    for (int i = 0; i < 8; ++i) write_le<float>(out, 76 + 4 * i, pixdim[i]);
    write_le<float>(out, 108, 352.f);  // vox_offset
    write_le<std::int16_t>(out, 252, 1);  // qform_code
    write_le<float>(out, 268, float(vol.origin[0]));
    write_le<float>(out, 272, float(vol.origin[1]));
    write_le<float>(out, 276, float(vol.origin[2]));
    out[344] = 'n';
    out[345] = '+';
    out[346] = '1';
    out[347] = 0;
    for (std::size_t i = 0; i < nvox; ++i) {
        const std::uint16_t v = std::uint16_t(vol.data[i]);
        out[352 + 2 * i] = std::uint8_t(v & 0xFF);
        out[353 + 2 * i] = std::uint8_t(v >> 8);
    }
    atomic_write_file(path, out);
}

}  // namespace dsatlas
