#include "modiff/clip.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace modiff {

void Clip::validate() const {
    if (motion.cols() != kMotionDim)
        throw std::invalid_argument("clip: motion must have 63 columns, has " +
                                    std::to_string(motion.cols()));
    if (control.cols() != kControlDim)
        throw std::invalid_argument("clip: control must have 3 columns, has " +
                                    std::to_string(control.cols()));
    if (motion.rows() != control.rows())
        throw std::invalid_argument("clip: motion and control frame counts differ (" +
                                    std::to_string(motion.rows()) + " vs " +
                                    std::to_string(control.rows()) + ")");
    if (!(fps > 0.0)) throw std::invalid_argument("clip: fps must be positive");
    if (mask) {
        if (mask->rows() != motion.rows() || mask->cols() != kMotionDim)
            throw std::invalid_argument("clip: mask shape must match motion");
        for (std::size_t i = 0; i < mask->size(); ++i)
            if (!(*mask)[i] && motion[i] != 0.0)
                throw std::invalid_argument("clip: masked-out entry " + std::to_string(i) +
                                            " must hold value 0");
    }
    for (std::size_t i = 0; i < motion.size(); ++i)
        if (!std::isfinite(motion[i]))
            throw std::invalid_argument("clip: non-finite motion value at flat index " +
                                        std::to_string(i));
    for (std::size_t i = 0; i < control.size(); ++i)
        if (!std::isfinite(control[i]))
            throw std::invalid_argument("clip: non-finite control value at flat index " +
                                        std::to_string(i));
}

std::vector<Window> slice_windows(const Clip& clip, std::size_t T_h, std::size_t T_p,
                                  std::size_t stride, bool* warned) {
    if (T_h == 0 || T_p == 0 || stride == 0)
        throw std::invalid_argument("slice_windows: T_h, T_p and stride must be positive");
    std::vector<Window> out;
    std::size_t T = clip.frames();
    std::size_t span = T_h + T_p;
    if (warned) *warned = false;
    if (T < span) {
        if (warned) *warned = true;
        return out;
    }
    for (std::size_t start = 0; start + span <= T; start += stride) {
        Window w;
        w.x = Mat(T_h, kMotionDim);
        w.c = Mat(span, kControlDim);
        w.y = Mat(T_p, kMotionDim);
        for (std::size_t t = 0; t < T_h; ++t)
            std::memcpy(w.x.row(t), clip.motion.row(start + t), kMotionDim * sizeof(double));
        for (std::size_t t = 0; t < span; ++t)
            std::memcpy(w.c.row(t), clip.control.row(start + t), kControlDim * sizeof(double));
        for (std::size_t t = 0; t < T_p; ++t)
            std::memcpy(w.y.row(t), clip.motion.row(start + T_h + t), kMotionDim * sizeof(double));
        if (clip.mask) {
            Mask xm(T_h, kMotionDim);
            for (std::size_t t = 0; t < T_h; ++t)
                for (std::size_t d = 0; d < kMotionDim; ++d) xm(t, d) = (*clip.mask)(start + t, d);
            w.x_mask = std::move(xm);
        }
        out.push_back(std::move(w));
    }
    return out;
}

Clip mirror(const Clip& clip, const SkeletonSpec& skel) {
    clip.validate();
    skel.validate();
    // Joint image under the left/right swap; unpaired joints map to themselves.
    std::vector<int> image(skel.joint_count());
    for (std::size_t j = 0; j < image.size(); ++j) image[j] = int(j);
    for (auto [l, r] : skel.mirror_pairs) {
        image[l] = r;
        image[r] = l;
    }
    Clip out;
    out.fps = clip.fps;
    std::size_t T = clip.frames();
    out.motion = Mat(T, kMotionDim);
    out.control = clip.control;
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < image.size(); ++j) {
            std::size_t src = std::size_t(image[j]) * 3;
            for (std::size_t k = 0; k < 3; ++k) {
                double v = clip.motion(t, src + k);
                out.motion(t, j * 3 + k) = (int(k) == skel.lateral_axis) ? -v : v;
            }
        }
        out.control(t, 1) = -clip.control(t, 1);  // lateral
        out.control(t, 2) = -clip.control(t, 2);  // rotational
    }
    if (clip.mask) {
        Mask m(T, kMotionDim);
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t j = 0; j < image.size(); ++j)
                for (std::size_t k = 0; k < 3; ++k)
                    m(t, j * 3 + k) = (*clip.mask)(t, std::size_t(image[j]) * 3 + k);
        out.mask = std::move(m);
    }
    return out;
}

Clip time_reverse(const Clip& clip, bool negate_controls) {
    Clip out;
    out.fps = clip.fps;
    std::size_t T = clip.frames();
    out.motion = Mat(T, kMotionDim);
    out.control = Mat(T, kControlDim);
    for (std::size_t t = 0; t < T; ++t) {
        std::size_t src = T - 1 - t;
        std::memcpy(out.motion.row(t), clip.motion.row(src), kMotionDim * sizeof(double));
        for (std::size_t k = 0; k < kControlDim; ++k) {
            double v = clip.control(src, k);
            out.control(t, k) = negate_controls ? -v : v;
        }
    }
    if (clip.mask) {
        Mask m(T, kMotionDim);
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t d = 0; d < kMotionDim; ++d) m(t, d) = (*clip.mask)(T - 1 - t, d);
        out.mask = std::move(m);
    }
    return out;
}

Clip root_relative(const Clip& clip) {
    Clip out = clip;
    for (std::size_t t = 0; t < out.frames(); ++t) {
        double px = out.motion(t, 0);
        double pz = out.motion(t, 2);
        for (std::size_t j = 0; j < kMotionDim / 3; ++j) {
            out.motion(t, j * 3 + 0) -= px;
            out.motion(t, j * 3 + 2) -= pz;
        }
    }
    return out;
}

namespace {

bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// The mask row packs 63 observation bits into a 64-bit word, bit d =
// column d, printed as 16 hex characters.
std::uint64_t pack_mask_row(const Mask& mask, std::size_t t) {
    std::uint64_t bits = 0;
    for (std::size_t d = 0; d < kMotionDim; ++d)
        if (mask(t, d)) bits |= (std::uint64_t(1) << d);
    return bits;
}

void unpack_mask_row(std::uint64_t bits, Mask& mask, std::size_t t) {
    for (std::size_t d = 0; d < kMotionDim; ++d)
        mask(t, d) = (bits >> d) & 1 ? 1 : 0;
}

Clip load_clip_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("clip: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("clip: empty file " + path);
    double fps = 0.0;
    if (std::sscanf(line.c_str(), "# fps=%lf", &fps) != 1 || !(fps > 0.0))
        throw std::runtime_error("clip: malformed header in " + path +
                                 " (expected '# fps=<f>', got '" + line + "')");
    std::vector<double> motion, control;
    std::vector<std::uint64_t> maskbits;
    bool any_mask = false;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++row;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 66 && cells.size() != 67)
            throw std::runtime_error("clip: row " + std::to_string(row) + " of " + path + " has " +
                                     std::to_string(cells.size()) +
                                     " columns, expected 66 or 67");
        if (row > 1 && (cells.size() == 67) != any_mask)
            throw std::runtime_error("clip: row " + std::to_string(row) + " of " + path +
                                     " switches mask column presence mid-file");
        if (row == 1) any_mask = cells.size() == 67;
        for (std::size_t i = 0; i < 66; ++i) {
            char* end = nullptr;
            double v = std::strtod(cells[i].c_str(), &end);
            if (end == cells[i].c_str() || *end != '\0' || !std::isfinite(v))
                throw std::runtime_error("clip: bad value at row " + std::to_string(row) +
                                         ", column " + std::to_string(i + 1) + " of " + path);
            if (i < kMotionDim)
                motion.push_back(v);
            else
                control.push_back(v);
        }
        if (any_mask) {
            const std::string& hex = cells[66];
            if (hex.size() != 16 || hex.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos)
                throw std::runtime_error("clip: bad mask field at row " + std::to_string(row) +
                                         " of " + path);
            maskbits.push_back(std::strtoull(hex.c_str(), nullptr, 16));
        }
    }
    if (row == 0) throw std::runtime_error("clip: no frames in " + path);
    Clip c;
    c.fps = fps;
    c.motion = Mat::from_rows(row, kMotionDim, std::move(motion));
    c.control = Mat::from_rows(row, kControlDim, std::move(control));
    if (any_mask) {
        Mask m(row, kMotionDim);
        for (std::size_t t = 0; t < row; ++t) unpack_mask_row(maskbits[t], m, t);
        c.mask = std::move(m);
    }
    c.validate();
    return c;
}

void save_clip_csv(const Clip& clip, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("clip: cannot write " + path);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "# fps=%.17g\n", clip.fps);
    out << buf;
    for (std::size_t t = 0; t < clip.frames(); ++t) {
        for (std::size_t d = 0; d < kMotionDim; ++d) {
            std::snprintf(buf, sizeof(buf), "%.17g,", clip.motion(t, d));
            out << buf;
        }
        for (std::size_t k = 0; k < kControlDim; ++k) {
            std::snprintf(buf, sizeof(buf), k + 1 < kControlDim ? "%.17g," : "%.17g",
                          clip.control(t, k));
            out << buf;
        }
        if (clip.mask) {
            std::snprintf(buf, sizeof(buf), ",%016llx",
                          static_cast<unsigned long long>(pack_mask_row(*clip.mask, t)));
            out << buf;
        }
        out << "\n";
    }
    if (!out) throw std::runtime_error("clip: write failed for " + path);
}

constexpr char kClipMagic[8] = {'M', 'D', 'F', 'C', 'L', 'I', 'P', '1'};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v, const std::string& path) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("clip: truncated binary file " + path);
}

void save_clip_bin(const Clip& clip, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("clip: cannot write " + path);
    out.write(kClipMagic, sizeof(kClipMagic));
    write_pod(out, std::uint32_t(1));  // version
    write_pod(out, std::uint32_t(clip.frames()));
    write_pod(out, std::uint32_t(kMotionDim));
    write_pod(out, std::uint32_t(kControlDim));
    write_pod(out, std::uint8_t(clip.mask ? 1 : 0));
    write_pod(out, clip.fps);
    out.write(reinterpret_cast<const char*>(clip.motion.data()),
              std::streamsize(clip.motion.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(clip.control.data()),
              std::streamsize(clip.control.size() * sizeof(double)));
    if (clip.mask)
        for (std::size_t t = 0; t < clip.frames(); ++t) write_pod(out, pack_mask_row(*clip.mask, t));
    if (!out) throw std::runtime_error("clip: write failed for " + path);

    nlohmann::json side;
    side["format"] = "modiff-clip-binary";
    side["version"] = 1;
    side["fps"] = clip.fps;
    side["frames"] = clip.frames();
    side["units"] = "m";
    side["joint_names"] = default_skeleton().joint_names;
    side["has_mask"] = bool(clip.mask);
    std::ofstream sidecar(path + ".json");
    if (!sidecar) throw std::runtime_error("clip: cannot write sidecar for " + path);
    sidecar << side.dump(2) << "\n";
}

Clip load_clip_bin(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("clip: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kClipMagic, sizeof(magic)) != 0)
        throw std::runtime_error("clip: bad magic in " + path);
    std::uint32_t version = 0, T = 0, mcols = 0, ccols = 0;
    std::uint8_t has_mask = 0;
    double fps = 0.0;
    read_pod(in, version, path);
    if (version != 1) throw std::runtime_error("clip: unsupported version in " + path);
    read_pod(in, T, path);
    read_pod(in, mcols, path);
    read_pod(in, ccols, path);
    read_pod(in, has_mask, path);
    read_pod(in, fps, path);
    if (mcols != kMotionDim || ccols != kControlDim)
        throw std::runtime_error("clip: column counts in " + path + " (" + std::to_string(mcols) +
                                 "/" + std::to_string(ccols) + ") do not match expected 63/3");
    Clip c;
    c.fps = fps;
    c.motion = Mat(T, kMotionDim);
    c.control = Mat(T, kControlDim);
    in.read(reinterpret_cast<char*>(c.motion.data()),
            std::streamsize(c.motion.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(c.control.data()),
            std::streamsize(c.control.size() * sizeof(double)));
    if (!in) throw std::runtime_error("clip: truncated binary file " + path);
    if (has_mask) {
        Mask m(T, kMotionDim);
        for (std::size_t t = 0; t < T; ++t) {
            std::uint64_t bits = 0;
            read_pod(in, bits, path);
            unpack_mask_row(bits, m, t);
        }
        c.mask = std::move(m);
    }
    c.validate();
    return c;
}

}  // namespace

Clip load_clip(const std::string& path) {
    return has_suffix(path, ".csv") ? load_clip_csv(path) : load_clip_bin(path);
}

void save_clip(const Clip& clip, const std::string& path) {
    clip.validate();
    if (has_suffix(path, ".csv"))
        save_clip_csv(clip, path);
    else
        save_clip_bin(clip, path);
}

}  // namespace modiff
