#include "smm/data.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

using nlohmann::json;

namespace smm::data {

bool FrameRecord::has_au() const {
    return std::any_of(au_labels.begin(), au_labels.end(),
                       [](int v) { return v >= 0; });
}

namespace {

const char kB64Chars[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string b64_encode(const std::vector<unsigned char>& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 3 <= bytes.size()) {
        unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kB64Chars[(v >> 18) & 63];
        out += kB64Chars[(v >> 12) & 63];
        out += kB64Chars[(v >> 6) & 63];
        out += kB64Chars[v & 63];
        i += 3;
    }
    std::size_t rem = bytes.size() - i;
    if (rem == 1) {
        unsigned v = bytes[i] << 16;
        out += kB64Chars[(v >> 18) & 63];
        out += kB64Chars[(v >> 12) & 63];
        out += "==";
    } else if (rem == 2) {
        unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out += kB64Chars[(v >> 18) & 63];
        out += kB64Chars[(v >> 12) & 63];
        out += kB64Chars[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

std::vector<unsigned char> b64_decode(const std::string& s) {
    static int lut[256];
    static bool init = false;
    if (!init) {
        std::fill(std::begin(lut), std::end(lut), -1);
        for (int i = 0; i < 64; ++i) lut[static_cast<unsigned char>(kB64Chars[i])] = i;
        init = true;
    }
    std::vector<unsigned char> out;
    out.reserve(s.size() / 4 * 3);
    unsigned acc = 0;
    int bits = 0;
    for (char ch : s) {
        if (ch == '=') break;
        int v = lut[static_cast<unsigned char>(ch)];
        if (v < 0) throw Error("invalid base64 character");
        acc = (acc << 6) | static_cast<unsigned>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<unsigned char>((acc >> bits) & 0xff));
        }
    }
    return out;
}

json image_to_json(const Image& img) {
    std::vector<unsigned char> bytes(img.pixels.size() * 4);
    for (Eigen::Index i = 0; i < img.pixels.size(); ++i) {
        float f = static_cast<float>(img.pixels(i));
        std::memcpy(bytes.data() + i * 4, &f, 4);
    }
    return json{{"shape", {img.height, img.width, img.channels}},
                {"b64", b64_encode(bytes)}};
}

Image image_from_json(const json& j) {
    Image img;
    auto shape = j.at("shape");
    img.height = shape.at(0).get<int>();
    img.width = shape.at(1).get<int>();
    img.channels = shape.at(2).get<int>();
    std::vector<unsigned char> bytes = b64_decode(j.at("b64").get<std::string>());
    Eigen::Index n =
        static_cast<Eigen::Index>(img.height) * img.width * img.channels;
    if (static_cast<Eigen::Index>(bytes.size()) != n * 4)
        throw Error("image payload size does not match shape");
    img.pixels.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        float f;
        std::memcpy(&f, bytes.data() + i * 4, 4);
        img.pixels(i) = static_cast<double>(f);
    }
    return img;
}

void validate_record(const FrameRecord& r, std::size_t line_no) {
    auto fail = [&](const std::string& msg) {
        throw Error("manifest line " + std::to_string(line_no) + ": " + msg);
    };
    if (r.video_id.empty()) fail("empty video_id");
    if (r.frame_index < 0) fail("negative frame_index");
    for (std::size_t i = 0; i < r.au_labels.size(); ++i)
        if (r.au_labels[i] < -1 || r.au_labels[i] > 1)
            fail("label out of range: au[" + std::to_string(i) + "]");
    if (r.expr_label < -1 || r.expr_label >= kNumExpr)
        fail("label out of range: expr=" + std::to_string(r.expr_label));
    auto va_ok = [](double v) {
        return v == kVaMissing || (v >= -1.0 && v <= 1.0);
    };
    if (!va_ok(r.valence) || !va_ok(r.arousal)) fail("label out of range: valence/arousal");
    if ((r.valence == kVaMissing) != (r.arousal == kVaMissing))
        fail("valence and arousal must be both present or both missing");
}

} // namespace

DatasetIndex build_index(std::vector<FrameRecord> records) {
    std::stable_sort(records.begin(), records.end(),
                     [](const FrameRecord& a, const FrameRecord& b) {
                         if (a.video_id != b.video_id) return a.video_id < b.video_id;
                         return a.frame_index < b.frame_index;
                     });
    DatasetIndex idx;
    idx.records = std::move(records);
    for (std::size_t i = 0; i < idx.records.size(); ++i) {
        const FrameRecord& r = idx.records[i];
        if (i > 0 && idx.records[i - 1].video_id == r.video_id &&
            idx.records[i - 1].frame_index == r.frame_index)
            throw Error("duplicate (video_id, frame_index): " + r.video_id + "/" +
                        std::to_string(r.frame_index));
        auto [it, inserted] = idx.videos.try_emplace(r.video_id, VideoRange{i, i + 1});
        if (!inserted) it->second.end = i + 1;
        if (r.has_au()) idx.task_coverage.au++;
        if (r.has_expr()) idx.task_coverage.expr++;
        if (r.has_va()) idx.task_coverage.va++;
    }
    return idx;
}

DatasetIndex load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open manifest: " + path);
    std::vector<FrameRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error("manifest line " + std::to_string(line_no) +
                        ": parse failure: " + e.what());
        }
        FrameRecord r;
        try {
            r.video_id = j.at("video_id").get<std::string>();
            r.frame_index = j.at("frame_index").get<long>();
            r.au_labels = j.at("au").get<std::vector<int>>();
            r.expr_label = j.at("expr").get<int>();
            r.valence = j.at("valence").get<double>();
            r.arousal = j.at("arousal").get<double>();
            if (j.contains("image")) {
                const json& im = j.at("image");
                if (im.is_string())
                    r.image_path = im.get<std::string>();
                else
                    r.image = image_from_json(im);
            }
        } catch (const json::exception& e) {
            throw Error("manifest line " + std::to_string(line_no) +
                        ": missing or malformed field: " + e.what());
        }
        validate_record(r, line_no);
        records.push_back(std::move(r));
    }
    return build_index(std::move(records));
}

void save_manifest(const DatasetIndex& index, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write manifest: " + path);
    for (const FrameRecord& r : index.records) {
        json j{{"video_id", r.video_id},
               {"frame_index", r.frame_index},
               {"au", r.au_labels},
               {"expr", r.expr_label},
               {"valence", r.valence},
               {"arousal", r.arousal}};
        if (r.image)
            j["image"] = image_to_json(*r.image);
        else if (!r.image_path.empty())
            j["image"] = r.image_path;
        out << j.dump() << "\n";
    }
}

Vec compute_au_weights(const DatasetIndex& index, int num_au) {
    Eigen::VectorXi pos = Eigen::VectorXi::Zero(num_au);
    Eigen::VectorXi neg = Eigen::VectorXi::Zero(num_au);
    for (const FrameRecord& r : index.records) {
        for (int i = 0; i < num_au && i < static_cast<int>(r.au_labels.size()); ++i) {
            if (r.au_labels[i] == 1) pos(i)++;
            else if (r.au_labels[i] == 0) neg(i)++;
        }
    }
    Vec w(num_au);
    for (int i = 0; i < num_au; ++i) {
        if (pos(i) == 0 || neg(i) == 0)
            throw Error("AU " + std::to_string(i) +
                        " lacks positive or negative labeled samples");
        w(i) = static_cast<double>(neg(i)) / static_cast<double>(pos(i));
    }
    return w;
}

Vec compute_expr_weights(const DatasetIndex& index, int num_classes) {
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(num_classes);
    long total = 0;
    for (const FrameRecord& r : index.records) {
        if (r.expr_label >= 0 && r.expr_label < num_classes) {
            counts(r.expr_label)++;
            ++total;
        }
    }
    Vec w(num_classes);
    for (int i = 0; i < num_classes; ++i) {
        if (counts(i) == 0)
            throw Error("expression class " + std::to_string(i) +
                        " has no labeled samples");
        w(i) = static_cast<double>(total) /
               (static_cast<double>(num_classes) * counts(i));
    }
    return w;
}

DatasetIndex downsample_sequence(const DatasetIndex& index, int factor) {
    if (factor < 1) throw Error("downsample factor must be >= 1");
    std::vector<FrameRecord> kept;
    for (const auto& [vid, range] : index.videos) {
        for (std::size_t i = range.begin; i < range.end; ++i)
            if ((i - range.begin) % static_cast<std::size_t>(factor) == 0)
                kept.push_back(index.records[i]);
    }
    return build_index(std::move(kept));
}

namespace {

// Brightness patterns: EXPR plants a bright square in one of 8 grid cells;
// AU plants one patch per active unit on a 4x3 grid; VA modulates the left
// and right image halves with (v+1)/2 and (a+1)/2.
void draw_rect(Image& img, int y0, int x0, int h, int w, double value) {
    for (int y = y0; y < std::min(y0 + h, img.height); ++y)
        for (int x = x0; x < std::min(x0 + w, img.width); ++x)
            for (int c = 0; c < img.channels; ++c)
                img.at(y, x, c) = std::clamp(img.at(y, x, c) + value, 0.0, 1.0);
}

Image base_image(int size, Rng& rng, double noise) {
    Image img;
    img.height = img.width = size;
    img.channels = 3;
    img.pixels.resize(static_cast<Eigen::Index>(size) * size * 3);
    for (Eigen::Index i = 0; i < img.pixels.size(); ++i)
        img.pixels(i) = 0.1 + noise * rng.uniform();
    return img;
}

} // namespace

DatasetIndex make_synthetic_dataset(const SyntheticConfig& cfg, std::uint64_t seed) {
    const int au_T = cfg.au_frames > 0 ? cfg.au_frames : cfg.frames_per_video;
    const int expr_T = cfg.expr_frames > 0 ? cfg.expr_frames : cfg.frames_per_video;
    const int va_T = cfg.va_frames > 0 ? cfg.va_frames : cfg.frames_per_video;
    if (cfg.au_videos * au_T + cfg.expr_videos * expr_T + cfg.va_videos * va_T <= 0)
        throw Error("synthetic dataset must request at least one frame");
    Rng rng(seed);
    std::vector<FrameRecord> records;
    const int S = cfg.image_size;
    const int cell = S / 4;

    auto make_frame = [&](const std::string& vid, int t) {
        FrameRecord r;
        r.video_id = vid;
        r.frame_index = t;
        r.au_labels.assign(cfg.num_au, -1);
        return r;
    };

    for (int v = 0; v < cfg.au_videos; ++v) {
        std::string vid = "au_" + std::to_string(v);
        for (int t = 0; t < au_T; ++t) {
            FrameRecord r = make_frame(vid, t);
            Image img = base_image(S, rng, cfg.pixel_noise);
            for (int h = 0; h < cfg.num_au; ++h) {
                // phase per unit: 2 of every 4 consecutive frames active
                bool active = ((h + t) % 4) < 2;
                r.au_labels[h] = active ? 1 : 0;
                if (active) {
                    int gy = h / 4, gx = h % 4;
                    draw_rect(img, gy * cell + cell / 4, gx * cell + cell / 4,
                              cell / 2, cell / 2, 0.7);
                }
            }
            r.image = std::move(img);
            records.push_back(std::move(r));
        }
    }

    for (int v = 0; v < cfg.expr_videos; ++v) {
        std::string vid = "expr_" + std::to_string(v);
        for (int t = 0; t < expr_T; ++t) {
            FrameRecord r = make_frame(vid, t);
            r.expr_label = t % cfg.num_expr;
            Image img = base_image(S, rng, cfg.pixel_noise);
            int gy = r.expr_label / 3, gx = r.expr_label % 3;
            int cell3 = S / 3;
            draw_rect(img, gy * cell3 + cell3 / 4, gx * cell3 + cell3 / 4,
                      cell3 / 2, cell3 / 2, 0.8);
            r.image = std::move(img);
            records.push_back(std::move(r));
        }
    }

    for (int v = 0; v < cfg.va_videos; ++v) {
        std::string vid = "va_" + std::to_string(v);
        double phase = 2.0 * M_PI * v / std::max(cfg.va_videos, 1);
        for (int t = 0; t < va_T; ++t) {
            FrameRecord r = make_frame(vid, t);
            double ang = 2.0 * M_PI * t / va_T + phase;
            r.valence = 0.8 * std::sin(ang);
            r.arousal = 0.8 * std::cos(ang);
            Image img = base_image(S, rng, cfg.pixel_noise);
            draw_rect(img, 0, 0, S, S / 2, 0.6 * (r.valence + 1.0) / 2.0);
            draw_rect(img, 0, S / 2, S, S - S / 2, 0.6 * (r.arousal + 1.0) / 2.0);
            r.image = std::move(img);
            records.push_back(std::move(r));
        }
    }

    return build_index(std::move(records));
}

} // namespace smm::data
