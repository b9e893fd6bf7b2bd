#include "latentfuse/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"

namespace latentfuse {

PreparedSample prepare_sample(const BuildingSample& sample, MaskingStrategy satellite, MaskingStrategy street) {
    PreparedSample out;
    out.id = sample.segment_id;
    out.views.reserve(sample.street.size() + 1);
    out.views.push_back(apply_masking(sample.satellite, sample.satellite_mask, satellite));
    for (const auto& view : sample.street) out.views.push_back(apply_masking(view.image, view.mask, street));
    out.elements = sample.elements;
    out.materials = sample.materials;
    return out;
}

std::vector<PreparedSample> prepare_samples(std::span<const BuildingSample> samples, MaskingStrategy satellite,
                                            MaskingStrategy street) {
    std::vector<PreparedSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(prepare_sample(s, satellite, street));
    return out;
}

namespace {

constexpr std::array<char, 4> kImageMagic = {'L', 'F', 'T', '0'};
constexpr std::array<char, 4> kMaskMagic = {'L', 'F', 'M', '0'};

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ValidationError("cannot write '" + path.string() + "'");
    return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot read '" + path.string() + "'");
    return is;
}

} // namespace

void write_image(const std::filesystem::path& path, const Image& img) {
    auto os = open_out(path);
    binary::put_magic(os, kImageMagic);
    binary::put_u32(os, std::uint32_t(img.channels));
    binary::put_u32(os, std::uint32_t(img.height));
    binary::put_u32(os, std::uint32_t(img.width));
    for (float v : img.pixels) binary::put_f32(os, v);
}

Image read_image(const std::filesystem::path& path) {
    auto is = open_in(path);
    const std::string what = path.string();
    if (binary::get_magic(is, what) != kImageMagic) throw ValidationError(what + ": not an LFT0 image");
    const std::size_t c = binary::get_u32(is, what), h = binary::get_u32(is, what), w = binary::get_u32(is, what);
    if (c == 0 || h == 0 || w == 0 || c * h * w > (std::size_t(1) << 28)) {
        throw ValidationError(what + ": implausible image dimensions");
    }
    Image img(c, h, w);
    for (auto& v : img.pixels) v = binary::get_f32(is, what);
    return img;
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
    auto os = open_out(path);
    binary::put_magic(os, kMaskMagic);
    binary::put_u32(os, std::uint32_t(mask.height));
    binary::put_u32(os, std::uint32_t(mask.width));
    os.write(reinterpret_cast<const char*>(mask.values.data()), std::streamsize(mask.values.size()));
}

BinaryMask read_mask(const std::filesystem::path& path) {
    auto is = open_in(path);
    const std::string what = path.string();
    if (binary::get_magic(is, what) != kMaskMagic) throw ValidationError(what + ": not an LFM0 mask");
    const std::size_t h = binary::get_u32(is, what), w = binary::get_u32(is, what);
    if (h == 0 || w == 0 || h * w > (std::size_t(1) << 28)) throw ValidationError(what + ": implausible mask size");
    BinaryMask mask(h, w);
    binary::read_exact(is, reinterpret_cast<char*>(mask.values.data()), mask.values.size(), what);
    return mask;
}

namespace {

nlohmann::ordered_json camera_json(const CameraPose& c) {
    nlohmann::ordered_json j;
    j["position"] = {c.position.x, c.position.y, c.position.z};
    j["yaw"] = c.yaw;
    j["focal"] = c.focal;
    j["cx"] = c.cx;
    j["cy"] = c.cy;
    j["image_size"] = c.image_size;
    return j;
}

CameraPose camera_from_json(const nlohmann::json& j) {
    CameraPose c;
    const auto& p = j.at("position");
    c.position = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
    c.yaw = j.at("yaw").get<double>();
    c.focal = j.at("focal").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.image_size = j.at("image_size").get<std::size_t>();
    return c;
}

template <std::size_t N>
void bits_from_json(const nlohmann::json& j, std::array<std::uint8_t, N>& out, const std::string& what) {
    if (!j.is_array() || j.size() != N) throw ValidationError("manifest: '" + what + "' must have " +
                                                              std::to_string(N) + " bits");
    for (std::size_t i = 0; i < N; ++i) {
        const int v = j.at(i).get<int>();
        if (v != 0 && v != 1) throw ValidationError("manifest: '" + what + "' bits must be 0 or 1");
        out[i] = std::uint8_t(v);
    }
}

} // namespace

void write_dataset(const std::filesystem::path& dir, std::span<const BuildingSample> samples) {
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json records = nlohmann::ordered_json::array();
    for (const auto& s : samples) {
        nlohmann::ordered_json r;
        r["id"] = s.segment_id;
        r["elements"] = s.elements;
        r["materials"] = s.materials;
        const std::string sat = s.segment_id + "_sat";
        write_image(dir / (sat + ".lft"), s.satellite);
        write_mask(dir / (sat + ".lfm"), s.satellite_mask);
        r["satellite"] = {{"image", sat + ".lft"}, {"mask", sat + ".lfm"}};
        nlohmann::ordered_json street = nlohmann::ordered_json::array();
        for (std::size_t v = 0; v < s.street.size(); ++v) {
            const std::string name = s.segment_id + "_st" + std::to_string(v);
            write_image(dir / (name + ".lft"), s.street[v].image);
            write_mask(dir / (name + ".lfm"), s.street[v].mask);
            nlohmann::ordered_json view;
            view["image"] = name + ".lft";
            view["mask"] = name + ".lfm";
            view["camera"] = camera_json(s.street[v].camera);
            street.push_back(view);
        }
        r["street"] = street;
        records.push_back(r);
    }
    nlohmann::ordered_json manifest;
    manifest["format"] = "latentfuse-dataset";
    manifest["version"] = 1;
    manifest["samples"] = records;
    std::ofstream os(dir / "manifest.json", std::ios::trunc);
    if (!os) throw ValidationError("cannot write manifest in '" + dir.string() + "'");
    os << manifest.dump(2) << '\n';
}

std::vector<BuildingSample> read_dataset(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw ValidationError("dataset '" + dir.string() + "' has no manifest.json");
    std::vector<BuildingSample> out;
    try {
        const auto manifest = nlohmann::json::parse(is);
        for (const auto& r : manifest.at("samples")) {
            BuildingSample s;
            s.segment_id = r.at("id").get<std::string>();
            bits_from_json(r.at("elements"), s.elements, "elements");
            bits_from_json(r.at("materials"), s.materials, "materials");
            s.satellite = read_image(dir / r.at("satellite").at("image").get<std::string>());
            s.satellite_mask = read_mask(dir / r.at("satellite").at("mask").get<std::string>());
            for (const auto& v : r.at("street")) {
                StreetView view;
                view.image = read_image(dir / v.at("image").get<std::string>());
                view.mask = read_mask(dir / v.at("mask").get<std::string>());
                view.camera = camera_from_json(v.at("camera"));
                s.street.push_back(std::move(view));
            }
            if (s.street.size() > kMaxStreetViews) {
                throw ValidationError("manifest: sample '" + s.segment_id + "' has more than 8 street views");
            }
            out.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed manifest in '" + dir.string() + "': " + e.what());
    }
    return out;
}

} // namespace latentfuse
