#include "avgaudit/learn/external_classifier.hpp"

#include "avgaudit/core/error.hpp"
#include "avgaudit/core/image_io.hpp"

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>
#include <fcntl.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

extern char** environ;

namespace avgaudit::learn {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) return {};
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

// Scratch directory removed on scope exit.
class ScratchDir {
public:
    ScratchDir() {
        std::string templ = (fs::temp_directory_path() / "avgaudit-adapter-XXXXXX").string();
        if (!::mkdtemp(templ.data())) throw AdapterError("cannot create adapter scratch directory: " + std::string(std::strerror(errno)));
        path_ = templ;
    }
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
    const fs::path& path() const noexcept { return path_; }

private:
    fs::path path_;
};

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    return s.substr(i);
}

} // namespace

std::vector<std::string> split_command(const std::string& command) {
    std::istringstream ss(command);
    std::vector<std::string> out{std::istream_iterator<std::string>(ss), std::istream_iterator<std::string>()};
    return out;
}

std::vector<std::vector<double>> parse_scores_csv(const std::string& text, std::size_t rows, int num_classes) {
    std::istringstream ss(text);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(ss, line)) {
        line = trim(line);
        if (!line.empty()) lines.push_back(line);
    }
    if (lines.empty()) throw AdapterError("adapter produced an empty scores file");

    const auto header = split_fields(lines[0]);
    if (header.size() != static_cast<std::size_t>(num_classes) + 1 || trim(header[0]) != "index")
        throw AdapterError("adapter scores header must be index,score_0..score_" + std::to_string(num_classes - 1) +
                           ", got '" + lines[0] + "'");
    for (int k = 0; k < num_classes; ++k)
        if (trim(header[static_cast<std::size_t>(k) + 1]) != "score_" + std::to_string(k))
            throw AdapterError("adapter scores header column " + std::to_string(k + 1) + " is '" + header[static_cast<std::size_t>(k) + 1] + "'");
    if (lines.size() - 1 != rows)
        throw AdapterError("adapter returned " + std::to_string(lines.size() - 1) + " score rows for " +
                           std::to_string(rows) + " images");

    std::vector<std::vector<double>> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto f = split_fields(lines[r + 1]);
        if (f.size() != static_cast<std::size_t>(num_classes) + 1)
            throw AdapterError("adapter score row " + std::to_string(r) + " has " + std::to_string(f.size()) + " fields");
        if (trim(f[0]) != std::to_string(r))
            throw AdapterError("adapter score row " + std::to_string(r) + " carries index '" + f[0] + "'");
        out[r].resize(static_cast<std::size_t>(num_classes));
        for (int k = 0; k < num_classes; ++k) {
            const std::string field = trim(f[static_cast<std::size_t>(k) + 1]);
            char* end = nullptr;
            const double v = std::strtod(field.c_str(), &end);
            if (field.empty() || *end != '\0' || !std::isfinite(v))
                throw AdapterError("adapter score row " + std::to_string(r) + " has a bad value '" + field + "'");
            out[r][static_cast<std::size_t>(k)] = v;
        }
    }
    return out;
}

ExternalClassifier::ExternalClassifier(std::vector<std::string> command, int num_classes, std::string name,
                                       Preprocess preprocess, std::size_t max_batch)
    : command_(std::move(command)), num_classes_(num_classes), name_(std::move(name)), preprocess_(preprocess),
      max_batch_(max_batch) {
    if (command_.empty()) throw ConfigError("external classifier needs a command");
    if (num_classes_ < 2) throw ConfigError("external classifier needs at least 2 classes");
    if (max_batch_ == 0) throw ConfigError("adapter batch size must be positive");
}

std::vector<double> ExternalClassifier::predict(const Image& image) const {
    return predict_batch(std::span<const Image>(&image, 1)).front();
}

std::vector<std::vector<double>> ExternalClassifier::predict_batch(std::span<const Image> images) const {
    std::vector<std::vector<double>> out;
    out.reserve(images.size());
    for (std::size_t start = 0; start < images.size(); start += max_batch_) {
        auto part = run_batch(images.subspan(start, std::min(max_batch_, images.size() - start)));
        for (auto& s : part) out.push_back(std::move(s));
    }
    return out;
}

std::vector<std::vector<double>> ExternalClassifier::run_batch(std::span<const Image> images) const {
    ScratchDir dir;
    const fs::path manifest = dir.path() / "batch_manifest.txt";
    const fs::path scores = dir.path() / "scores.csv";
    const fs::path err_path = dir.path() / "stderr.txt";
    {
        std::ofstream m(manifest);
        for (std::size_t i = 0; i < images.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "image_%06zu.avgi", i);
            const fs::path p = dir.path() / name;
            save_float_raster(images[i], p);
            m << p.string() << '\n';
        }
        if (!m) throw AdapterError("cannot write adapter manifest");
    }

    std::vector<std::string> args = command_;
    args.insert(args.end(), {"--manifest", manifest.string(), "--out", scores.string()});
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, "/dev/null", O_WRONLY, 0);
    pid_t pid = 0;
    const int rc = posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) throw AdapterError("cannot start adapter '" + command_[0] + "': " + std::strerror(rc));

    int status = 0;
    while (::waitpid(pid, &status, 0) < 0) {
        if (errno != EINTR) throw AdapterError("waiting for adapter failed: " + std::string(std::strerror(errno)));
    }
    const std::string captured = read_text(err_path);
    if (WIFSIGNALED(status))
        throw AdapterError("adapter '" + command_[0] + "' was killed by signal " + std::to_string(WTERMSIG(status)), captured);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
        throw AdapterError("adapter '" + command_[0] + "' exited with status " + std::to_string(WEXITSTATUS(status)), captured);
    if (!fs::exists(scores)) throw AdapterError("adapter '" + command_[0] + "' wrote no scores file", captured);

    try {
        return parse_scores_csv(read_text(scores), images.size(), num_classes_);
    } catch (const AdapterError& e) {
        throw AdapterError(e.what(), captured);
    }
}

} // namespace avgaudit::learn
