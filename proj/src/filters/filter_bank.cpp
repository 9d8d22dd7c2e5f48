#include "avgaudit/filters/kernel.hpp"

#include "avgaudit/core/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace avgaudit::filters {

namespace detail {
extern const std::string_view kBundledSrmText;
}

Kernel::Kernel(int size, int depth, std::vector<double> weights)
    : size_(size), depth_(depth), weights_(std::move(weights)) {
    if (size < 1 || size % 2 == 0) throw DataError("kernel size must be odd, got " + std::to_string(size));
    if (depth < 1) throw DataError("kernel depth must be positive");
    if (weights_.size() != static_cast<std::size_t>(size) * size * depth)
        throw DataError("kernel weight count does not match size and depth");
    for (double v : weights_)
        if (!std::isfinite(v)) throw DataError("kernel weight is not finite");
}

Kernel Kernel::padded_to(int size) const {
    if (size < size_ || size % 2 == 0) throw DataError("cannot pad kernel to size " + std::to_string(size));
    const int off = (size - size_) / 2;
    std::vector<double> w(static_cast<std::size_t>(size) * size * depth_, 0.0);
    for (int d = 0; d < depth_; ++d)
        for (int m = 0; m < size_; ++m)
            for (int n = 0; n < size_; ++n)
                w[(static_cast<std::size_t>(d) * size + m + off) * size + n + off] = weight(m, n, d);
    return Kernel(size, depth_, std::move(w));
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& token, int line_no) {
    T value{};
    const auto* end = token.data() + token.size();
    const auto res = std::from_chars(token.data(), end, value);
    if (res.ec != std::errc{} || res.ptr != end)
        throw FormatError("filter bank line " + std::to_string(line_no) + ": bad number '" + token + "'");
    return value;
}

} // namespace

FilterBank parse_filter_bank(std::string_view text, std::string name) {
    std::vector<std::pair<int, std::string>> lines;
    {
        std::istringstream in{std::string(text)};
        std::string line;
        int no = 0;
        while (std::getline(in, line)) {
            ++no;
            auto t = trim(line);
            if (t.empty() || t.front() == '#') continue;
            lines.emplace_back(no, std::move(t));
        }
    }

    FilterBank bank;
    bank.name = std::move(name);
    bank.source_text = std::string(text);
    std::size_t pos = 0;
    int max_size = 0;
    while (pos < lines.size()) {
        const auto& [no, header] = lines[pos++];
        std::vector<std::string> fields;
        std::stringstream hs(header);
        for (std::string f; std::getline(hs, f, ',');) fields.push_back(trim(f));
        if (fields.size() != 3 || fields[0].empty())
            throw FormatError("filter bank line " + std::to_string(no) + ": expected 'name, k, divisor'");
        const int k = parse_number<int>(fields[1], no);
        const double divisor = parse_number<double>(fields[2], no);
        if (k < 1 || k % 2 == 0) throw FormatError("filter bank line " + std::to_string(no) + ": kernel size must be odd");
        if (divisor == 0.0 || !std::isfinite(divisor))
            throw FormatError("filter bank line " + std::to_string(no) + ": divisor must be nonzero");

        std::vector<double> taps;
        taps.reserve(static_cast<std::size_t>(k) * k);
        for (int r = 0; r < k; ++r) {
            if (pos >= lines.size())
                throw FormatError("filter bank: kernel '" + fields[0] + "' is truncated");
            const auto& [row_no, row] = lines[pos++];
            std::istringstream rs(row);
            int count = 0;
            for (std::string tok; rs >> tok; ++count) taps.push_back(parse_number<int>(tok, row_no) / divisor);
            if (count != k)
                throw FormatError("filter bank line " + std::to_string(row_no) + ": expected " + std::to_string(k) + " taps");
        }
        max_size = std::max(max_size, k);
        bank.entries.push_back(BankEntry{fields[0], Kernel(k, 1, std::move(taps)), divisor});
    }
    if (bank.entries.empty()) throw FormatError("filter bank '" + bank.name + "' holds no kernels");
    for (auto& e : bank.entries)
        if (e.kernel.size() < max_size) e.kernel = e.kernel.padded_to(max_size);
    return bank;
}

FilterBank load_filter_bank(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open filter bank '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_filter_bank(ss.str(), path.stem().string());
}

const FilterBank& srm_filter_bank() {
    static const FilterBank bank = parse_filter_bank(detail::kBundledSrmText, "srm_basic");
    return bank;
}

Image cross_correlate(const Image& plane, std::span<const double> taps, int k) {
    if (plane.channels() != 1) throw DataError("cross_correlate expects a single-channel plane");
    if (taps.size() != static_cast<std::size_t>(k) * k) throw DataError("tap count does not match kernel size");
    const int h = plane.height(), w = plane.width(), r = k / 2;
    if (h <= r || w <= r) throw DataError("image too small for mirror padding of a " + std::to_string(k) + "x" + std::to_string(k) + " kernel");
    const int pw = w + 2 * r;
    std::vector<double> padded(static_cast<std::size_t>(h + 2 * r) * pw);
    for (int i = -r; i < h + r; ++i)
        for (int j = -r; j < w + r; ++j)
            padded[static_cast<std::size_t>(i + r) * pw + j + r] = plane.at(mirror_index(i, h), mirror_index(j, w));

    Image out(h, w, 1);
    auto dst = out.pixels();
    for (int m = 0; m < k; ++m) {
        for (int n = 0; n < k; ++n) {
            const double t = taps[static_cast<std::size_t>(m) * k + n];
            if (t == 0.0) continue;
            for (int i = 0; i < h; ++i) {
                const double* src = &padded[static_cast<std::size_t>(i + m) * pw + n];
                double* row = &dst[static_cast<std::size_t>(i) * w];
                for (int j = 0; j < w; ++j) row[j] += t * src[j];
            }
        }
    }
    return out;
}

Image apply_filter_bank(const Image& image, const FilterBank& bank) {
    const int h = image.height(), w = image.width();
    const int nk = static_cast<int>(bank.count());
    std::vector<double> out(static_cast<std::size_t>(h) * w * nk, 0.0);
    std::vector<Image> planes;
    for (int ch = 0; ch < image.channels(); ++ch) planes.push_back(image.channels() == 1 ? image : image.channel(ch));
    for (int c = 0; c < nk; ++c) {
        const Kernel& kern = bank.entries[static_cast<std::size_t>(c)].kernel;
        for (const auto& plane : planes) {
            const Image resp = cross_correlate(plane, kern.slice(0), kern.size());
            const auto src = resp.pixels();
            for (std::size_t p = 0; p < src.size(); ++p) out[p * nk + c] += src[p];
        }
    }
    return Image(h, w, nk, std::move(out));
}

} // namespace avgaudit::filters
