// Brute-force references and fixtures shared by the unit and acceptance tests.
// Everything here is independent of the library's own algorithms.
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

namespace oracle {

namespace fs = std::filesystem;

inline fs::path data_dir() { return LITMAP_TEST_DATA; }
inline std::string cli_path() { return LITMAP_CLI; }

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("litmap-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

/// Relative path -> bytes for every regular file under dir.
inline std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return out;
}

struct RunResult {
    int code = 0;
    std::string output;
};

/// Runs a shell command, capturing stdout and stderr together.
inline RunResult run(const std::string& cmd) {
    RunResult r;
    FILE* p = ::popen((cmd + " 2>&1").c_str(), "r");
    if (!p) return {-1, "popen failed"};
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
    const int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

inline std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

struct Blobs {
    std::vector<double> points;  // row-major n x d
    std::vector<int> labels;
    std::size_t n = 0;
    std::size_t d = 0;
};

/// k isotropic Gaussian blobs with centers drawn from N(0, spread²) per axis.
inline Blobs gaussian_blobs(std::size_t n, std::size_t d, int k, double spread, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<std::vector<double>> centers(static_cast<std::size_t>(k), std::vector<double>(d));
    for (auto& c : centers)
        for (auto& v : c) v = spread * nd(rng);
    Blobs b;
    b.n = n;
    b.d = d;
    for (std::size_t i = 0; i < n; ++i) {
        const int lab = static_cast<int>(i % static_cast<std::size_t>(k));
        b.labels.push_back(lab);
        for (std::size_t j = 0; j < d; ++j) b.points.push_back(centers[static_cast<std::size_t>(lab)][j] + sigma * nd(rng));
    }
    return b;
}

/// Fraction of each point's k nearest 2D neighbours sharing its label.
inline double knn_purity(const std::vector<double>& xy, const std::vector<int>& labels, std::size_t k) {
    const std::size_t n = labels.size();
    double agree = 0.0;
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < n; ++i) {
        d.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = xy[2 * i] - xy[2 * j], dy = xy[2 * i + 1] - xy[2 * j + 1];
            d.push_back({dx * dx + dy * dy, j});
        }
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
        for (std::size_t t = 0; t < k; ++t) agree += labels[d[t].second] == labels[i];
    }
    return agree / static_cast<double>(n * k);
}

/// Adjusted Rand index from the contingency table.
inline double adjusted_rand(const std::vector<int>& a, const std::vector<int>& b) {
    std::map<std::pair<int, int>, double> nij;
    std::map<int, double> ai, bj;
    for (std::size_t i = 0; i < a.size(); ++i) {
        nij[{a[i], b[i]}] += 1;
        ai[a[i]] += 1;
        bj[b[i]] += 1;
    }
    auto c2 = [](double x) { return x * (x - 1) / 2; };
    double sij = 0, sa = 0, sb = 0;
    for (const auto& [k, v] : nij) sij += c2(v);
    for (const auto& [k, v] : ai) sa += c2(v);
    for (const auto& [k, v] : bj) sb += c2(v);
    const double total = c2(static_cast<double>(a.size()));
    const double expected = sa * sb / total;
    const double maxi = (sa + sb) / 2;
    if (maxi == expected) return 1.0;
    return (sij - expected) / (maxi - expected);
}

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
    double uv = 0, uu = 0, vv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uv += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if (uu == 0 || vv == 0) return 0.0;
    return uv / std::sqrt(uu * vv);
}

/// Ids of the top-k rows by cosine to q, ties by ascending id.
inline std::vector<std::string> brute_top_k(const std::vector<std::vector<double>>& rows, const std::vector<std::string>& ids,
                                            const std::vector<double>& q, std::size_t k, const std::set<std::string>& skip) {
    std::vector<std::pair<double, std::string>> all;
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (!skip.contains(ids[i])) all.push_back({-cosine(q, rows[i]), ids[i]});
    std::sort(all.begin(), all.end());
    std::vector<std::string> out;
    for (std::size_t i = 0; i < all.size() && i < k; ++i) out.push_back(all[i].second);
    return out;
}

/// Textbook ray casting with an explicit on-edge test.
inline bool inside_polygon(const std::vector<std::pair<double, double>>& poly, double x, double y) {
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto [ax, ay] = poly[i];
        const auto [bx, by] = poly[(i + 1) % n];
        const double cross = (bx - ax) * (y - ay) - (by - ay) * (x - ax);
        if (cross == 0 && std::min(ax, bx) <= x && x <= std::max(ax, bx) && std::min(ay, by) <= y && y <= std::max(ay, by))
            return true;
    }
    bool in = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const auto [xi, yi] = poly[i];
        const auto [xj, yj] = poly[j];
        if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) in = !in;
    }
    return in;
}

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace oracle
