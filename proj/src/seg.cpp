#include "matforge/seg.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <random>
#include <set>

namespace matforge {

void recompute_mask_stats(RegionMask& mask, const TextureMap& color) {
    mask.pixel_count = 0;
    double sum[3] = {0, 0, 0};
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.test(x, y)) continue;
            ++mask.pixel_count;
            for (int c = 0; c < 3; ++c) sum[c] += color.at(x, y, c);
        }
    }
    for (int c = 0; c < 3; ++c)
        mask.mean_diffuse_rgb[c] = mask.pixel_count ? float(sum[c] / mask.pixel_count) : 0.0f;
}

std::vector<RegionMask> load_masks(const std::filesystem::path& dir, int view_id,
                                   const RenderOutput& render) {
    const GBuffer& gbuf = render.gbuffer;
    std::string prefix = "view" + std::to_string(view_id) + "_region";

    std::vector<std::filesystem::path> files;
    if (std::filesystem::is_directory(dir)) {
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            std::string name = entry.path().filename().string();
            if (name.rfind(prefix, 0) == 0 && entry.path().extension() == ".png")
                files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw Error(ErrorCode::NoMasksFound,
                    "no " + prefix + "*.png masks in " + dir.string());

    std::vector<RegionMask> masks;
    for (const auto& file : files) {
        PngImage png = read_png(file);
        if (png.width != gbuf.width || png.height != gbuf.height)
            throw Error(ErrorCode::ResolutionMismatch,
                        file.string() + " is " + std::to_string(png.width) + "x" +
                            std::to_string(png.height) + ", render is " +
                            std::to_string(gbuf.width) + "x" + std::to_string(gbuf.height));
        RegionMask mask;
        mask.view_id = view_id;
        mask.width = gbuf.width;
        mask.height = gbuf.height;
        mask.mask.assign(size_t(gbuf.width) * gbuf.height, 0);
        for (int y = 0; y < gbuf.height; ++y) {
            for (int x = 0; x < gbuf.width; ++x) {
                float v = png.data[(size_t(y) * png.width + x) * png.channels];
                if (v > 0.5f && gbuf.covered(x, y)) mask.set(x, y, true);
            }
        }
        recompute_mask_stats(mask, render.color);
        if (mask.pixel_count == 0) continue; // clipped away entirely
        mask.label = int(masks.size()) + 1;
        masks.push_back(std::move(mask));
    }
    if (masks.empty())
        throw Error(ErrorCode::NoMasksFound, "all masks in " + dir.string() + " fell on background");
    return masks;
}

// ---------------------------------------------------------------------------
// Fallback segmentation: seeded k-means++ -> connected components -> merge
// ---------------------------------------------------------------------------

namespace {

struct Rgb {
    float v[3];
};

double sq_dist(const Rgb& a, const Rgb& b) {
    double d0 = double(a.v[0]) - b.v[0];
    double d1 = double(a.v[1]) - b.v[1];
    double d2 = double(a.v[2]) - b.v[2];
    return d0 * d0 + d1 * d1 + d2 * d2;
}

struct KMeansRun {
    std::vector<int> assignment;
    std::vector<Rgb> centers;
    double inertia = 0.0;
};

KMeansRun run_kmeans(const std::vector<Rgb>& points, int k, uint32_t seed) {
    std::mt19937 rng(seed);
    KMeansRun run;
    run.centers.reserve(k);

    // k-means++ seeding
    std::vector<double> dist2(points.size(), std::numeric_limits<double>::max());
    run.centers.push_back(points[rng() % points.size()]);
    while (int(run.centers.size()) < k) {
        double total = 0.0;
        for (size_t i = 0; i < points.size(); ++i) {
            dist2[i] = std::min(dist2[i], sq_dist(points[i], run.centers.back()));
            total += dist2[i];
        }
        if (total <= 0.0) break; // fewer distinct colors than k
        std::uniform_real_distribution<double> uni(0.0, total);
        double target = uni(rng);
        double acc = 0.0;
        size_t pick = points.size() - 1;
        for (size_t i = 0; i < points.size(); ++i) {
            acc += dist2[i];
            if (acc >= target) {
                pick = i;
                break;
            }
        }
        run.centers.push_back(points[pick]);
    }
    k = int(run.centers.size());

    run.assignment.assign(points.size(), 0);
    for (int iter = 0; iter < 50; ++iter) {
        bool changed = false;
        for (size_t i = 0; i < points.size(); ++i) {
            int best = 0;
            double best_d = sq_dist(points[i], run.centers[0]);
            for (int c = 1; c < k; ++c) {
                double d = sq_dist(points[i], run.centers[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (run.assignment[i] != best) {
                run.assignment[i] = best;
                changed = true;
            }
        }
        std::vector<double> sums(k * 3, 0.0);
        std::vector<int64_t> counts(k, 0);
        for (size_t i = 0; i < points.size(); ++i) {
            int c = run.assignment[i];
            ++counts[c];
            for (int d = 0; d < 3; ++d) sums[c * 3 + d] += points[i].v[d];
        }
        for (int c = 0; c < k; ++c) {
            if (!counts[c]) continue;
            for (int d = 0; d < 3; ++d) run.centers[c].v[d] = float(sums[c * 3 + d] / counts[c]);
        }
        if (!changed) break;
    }

    run.inertia = 0.0;
    for (size_t i = 0; i < points.size(); ++i)
        run.inertia += sq_dist(points[i], run.centers[run.assignment[i]]);
    return run;
}

} // namespace

std::vector<RegionMask> fallback_segment(const RenderOutput& render, int k_max,
                                         const SegParams& params) {
    const GBuffer& gbuf = render.gbuffer;
    const int width = gbuf.width, height = gbuf.height;

    std::vector<int> fg_index; // linear pixel -> point index (-1 background)
    fg_index.assign(size_t(width) * height, -1);
    std::vector<Rgb> points;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            if (!gbuf.covered(x, y)) continue;
            fg_index[size_t(y) * width + x] = int(points.size());
            points.push_back({{render.color.at(x, y, 0), render.color.at(x, y, 1),
                               render.color.at(x, y, 2)}});
        }
    }
    int64_t foreground = int64_t(points.size());
    if (foreground == 0) return {};

    std::set<std::array<int, 3>> distinct;
    for (const Rgb& p : points) {
        distinct.insert({int(p.v[0] * 255.0f), int(p.v[1] * 255.0f), int(p.v[2] * 255.0f)});
        if (int(distinct.size()) > k_max) break;
    }
    int cap = std::min<int>(k_max, int(distinct.size()));

    // pick k by the elbow rule: grow while the relative inertia drop is big
    KMeansRun best = run_kmeans(points, 1, params.seed);
    for (int k = 2; k <= cap; ++k) {
        if (best.inertia <= 1e-12) break;
        KMeansRun next = run_kmeans(points, k, params.seed);
        double improvement = (best.inertia - next.inertia) / best.inertia;
        if (improvement < params.elbow_threshold) break;
        best = std::move(next);
    }

    // split clusters into 4-connected components
    std::vector<int> component(points.size(), -1);
    int n_components = 0;
    std::vector<int64_t> comp_size;
    std::vector<int> comp_cluster;
    std::deque<std::pair<int, int>> queue;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            int pi = fg_index[size_t(y) * width + x];
            if (pi < 0 || component[pi] >= 0) continue;
            int comp = n_components++;
            comp_size.push_back(0);
            comp_cluster.push_back(best.assignment[pi]);
            component[pi] = comp;
            queue.emplace_back(x, y);
            while (!queue.empty()) {
                auto [cx, cy] = queue.front();
                queue.pop_front();
                ++comp_size[comp];
                const int dx[4] = {1, -1, 0, 0};
                const int dy[4] = {0, 0, 1, -1};
                for (int d = 0; d < 4; ++d) {
                    int nx = cx + dx[d], ny = cy + dy[d];
                    if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
                    int ni = fg_index[size_t(ny) * width + nx];
                    if (ni < 0 || component[ni] >= 0) continue;
                    if (best.assignment[ni] != best.assignment[pi]) continue;
                    component[ni] = comp;
                    queue.emplace_back(nx, ny);
                }
            }
        }
    }

    // merge small components into the nearest-mean neighboring component
    std::vector<std::array<double, 3>> comp_sum(n_components, {0, 0, 0});
    for (size_t i = 0; i < points.size(); ++i)
        for (int c = 0; c < 3; ++c) comp_sum[component[i]][c] += points[i].v[c];
    auto comp_mean = [&](int comp) {
        Rgb m;
        for (int c = 0; c < 3; ++c) m.v[c] = float(comp_sum[comp][c] / std::max<int64_t>(comp_size[comp], 1));
        return m;
    };

    int64_t min_size = std::max<int64_t>(1, int64_t(params.merge_fraction * double(foreground)));
    bool merged = true;
    while (merged) {
        merged = false;
        // smallest component first, deterministic tie-break by id
        int victim = -1;
        for (int c = 0; c < n_components; ++c) {
            if (comp_size[c] > 0 && comp_size[c] < min_size &&
                (victim < 0 || comp_size[c] < comp_size[victim] ||
                 (comp_size[c] == comp_size[victim] && c < victim)))
                victim = c;
        }
        if (victim < 0) break;

        std::set<int> neighbors;
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                int pi = fg_index[size_t(y) * width + x];
                if (pi < 0 || component[pi] != victim) continue;
                const int dx[4] = {1, -1, 0, 0};
                const int dy[4] = {0, 0, 1, -1};
                for (int d = 0; d < 4; ++d) {
                    int nx = x + dx[d], ny = y + dy[d];
                    if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
                    int ni = fg_index[size_t(ny) * width + nx];
                    if (ni >= 0 && component[ni] != victim) neighbors.insert(component[ni]);
                }
            }
        }
        int target = -1;
        double best_d = std::numeric_limits<double>::max();
        Rgb vm = comp_mean(victim);
        for (int nb : neighbors) {
            double d = sq_dist(vm, comp_mean(nb));
            if (d < best_d || (d == best_d && nb < target)) {
                best_d = d;
                target = nb;
            }
        }
        if (target < 0) {
            // isolated island: nothing to merge into, keep it
            comp_size[victim] = -comp_size[victim]; // mark as processed-small-but-kept
            continue;
        }
        for (size_t i = 0; i < points.size(); ++i)
            if (component[i] == victim) component[i] = target;
        comp_size[target] += comp_size[victim];
        for (int c = 0; c < 3; ++c) comp_sum[target][c] += comp_sum[victim][c];
        comp_size[victim] = 0;
        merged = true;
    }
    for (int c = 0; c < n_components; ++c)
        if (comp_size[c] < 0) comp_size[c] = -comp_size[c];

    // emit masks in first-pixel scan order
    std::map<int, int> comp_to_label;
    std::vector<RegionMask> masks;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            int pi = fg_index[size_t(y) * width + x];
            if (pi < 0) continue;
            int comp = component[pi];
            auto it = comp_to_label.find(comp);
            if (it == comp_to_label.end()) {
                RegionMask mask;
                mask.view_id = 0;
                mask.label = int(masks.size()) + 1;
                mask.width = width;
                mask.height = height;
                mask.mask.assign(size_t(width) * height, 0);
                comp_to_label.emplace(comp, mask.label);
                masks.push_back(std::move(mask));
                it = comp_to_label.find(comp);
            }
            masks[it->second - 1].set(x, y, true);
        }
    }
    for (RegionMask& mask : masks) recompute_mask_stats(mask, render.color);
    return masks;
}

// ---------------------------------------------------------------------------
// Mask filtering
// ---------------------------------------------------------------------------

std::vector<RegionMask> filter_masks(std::vector<RegionMask> masks, const SegParams& params,
                                     FilterReport* report) {
    if (masks.empty()) return masks;
    const int width = masks[0].width, height = masks[0].height;

    // original areas decide who wins a contested pixel
    std::vector<int64_t> area(masks.size());
    int64_t union_before = 0;
    for (size_t m = 0; m < masks.size(); ++m) area[m] = masks[m].pixel_count;

    std::vector<int> owner(size_t(width) * height, -1);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            size_t pix = size_t(y) * width + x;
            for (size_t m = 0; m < masks.size(); ++m) {
                if (!masks[m].test(x, y)) continue;
                if (owner[pix] < 0) {
                    owner[pix] = int(m);
                } else {
                    int cur = owner[pix];
                    // smaller mask wins; equal area -> lower label
                    if (area[m] < area[cur] ||
                        (area[m] == area[cur] && masks[m].label < masks[cur].label))
                        owner[pix] = int(m);
                }
            }
            if (owner[pix] >= 0) ++union_before;
        }
    }

    std::vector<int64_t> resolved(masks.size(), 0);
    for (int v : owner)
        if (v >= 0) ++resolved[v];

    int64_t fg = union_before;
    int64_t dust_limit = int64_t(params.dust_fraction * double(fg));
    std::vector<bool> keep(masks.size());
    for (size_t m = 0; m < masks.size(); ++m) keep[m] = resolved[m] >= std::max<int64_t>(dust_limit, 1);

    if (report) {
        report->dust_pixels_dropped = 0;
        report->dust_masks_dropped = 0;
        for (size_t m = 0; m < masks.size(); ++m) {
            if (!keep[m]) {
                report->dust_pixels_dropped += resolved[m];
                ++report->dust_masks_dropped;
            }
        }
    }

    std::vector<RegionMask> out;
    for (size_t m = 0; m < masks.size(); ++m) {
        if (!keep[m]) continue;
        RegionMask mask;
        mask.view_id = masks[m].view_id;
        mask.label = int(out.size()) + 1;
        mask.width = width;
        mask.height = height;
        mask.mask.assign(size_t(width) * height, 0);
        out.push_back(std::move(mask));
    }
    std::vector<int> new_index(masks.size(), -1);
    {
        int next = 0;
        for (size_t m = 0; m < masks.size(); ++m)
            if (keep[m]) new_index[m] = next++;
    }
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            int own = owner[size_t(y) * width + x];
            if (own >= 0 && keep[own]) out[new_index[own]].set(x, y, true);
        }
    }
    for (RegionMask& mask : out) {
        // stats against whatever color backing was captured before; callers
        // refresh with recompute_mask_stats when they still hold the render
        mask.pixel_count = 0;
        for (uint8_t v : mask.mask) mask.pixel_count += v;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Set-of-Mark annotation
// ---------------------------------------------------------------------------

std::vector<float> squared_edt(const std::vector<uint8_t>& grid, int width, int height) {
    const float kInf = 1e20f;
    std::vector<float> dist(size_t(width) * height);
    for (size_t i = 0; i < dist.size(); ++i) dist[i] = grid[i] ? kInf : 0.0f;

    // 1D squared distance transform (lower envelope of parabolas)
    auto edt_1d = [](std::vector<float>& f, std::vector<float>& d, std::vector<int>& v,
                     std::vector<float>& z, int n) {
        int k = 0;
        v[0] = 0;
        z[0] = -1e20f;
        z[1] = 1e20f;
        for (int q = 1; q < n; ++q) {
            float s;
            while (true) {
                s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0f * q - 2.0f * v[k]);
                if (s <= z[k]) {
                    --k;
                } else {
                    break;
                }
            }
            ++k;
            v[k] = q;
            z[k] = s;
            z[k + 1] = 1e20f;
        }
        k = 0;
        for (int q = 0; q < n; ++q) {
            while (z[k + 1] < q) ++k;
            float dq = q - v[k];
            d[q] = dq * dq + f[v[k]];
        }
    };

    int n_max = std::max(width, height);
    std::vector<float> f(n_max), d(n_max), z(n_max + 1);
    std::vector<int> v(n_max);

    for (int x = 0; x < width; ++x) {
        for (int y = 0; y < height; ++y) f[y] = dist[size_t(y) * width + x];
        edt_1d(f, d, v, z, height);
        for (int y = 0; y < height; ++y) dist[size_t(y) * width + x] = d[y];
    }
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) f[x] = dist[size_t(y) * width + x];
        edt_1d(f, d, v, z, width);
        for (int x = 0; x < width; ++x) dist[size_t(y) * width + x] = d[x];
    }
    return dist;
}

void pole_of_inaccessibility(const RegionMask& mask, int& out_x, int& out_y) {
    // the transform treats out-of-image as background: pad by one and offset
    int w = mask.width + 2, h = mask.height + 2;
    std::vector<uint8_t> grid(size_t(w) * h, 0);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            grid[size_t(y + 1) * w + (x + 1)] = mask.test(x, y) ? 1 : 0;
    std::vector<float> dist = squared_edt(grid, w, h);

    float best = -1.0f;
    out_x = 0;
    out_y = 0;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.test(x, y)) continue;
            float d = dist[size_t(y + 1) * w + (x + 1)];
            if (d > best) {
                best = d;
                out_x = x;
                out_y = y;
            }
        }
    }
}

namespace {

// 5x7 digit glyphs, row-major, MSB left
const uint8_t kDigitFont[10][7] = {
    {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}, // 0
    {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}, // 1
    {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}, // 2
    {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}, // 3
    {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}, // 4
    {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}, // 5
    {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}, // 6
    {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}, // 7
    {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}, // 8
    {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}, // 9
};

void draw_label(TextureMap& img, int label, int cx, int cy) {
    std::string digits = std::to_string(label);
    const int scale = 2;
    const int gw = 5 * scale, gh = 7 * scale, gap = scale;
    int total_w = int(digits.size()) * gw + int(digits.size() - 1) * gap;
    int x0 = std::clamp(cx - total_w / 2, 0, std::max(0, img.width - total_w));
    int y0 = std::clamp(cy - gh / 2, 0, std::max(0, img.height - gh));

    // black backing plate
    for (int y = y0 - 2; y < y0 + gh + 2; ++y) {
        for (int x = x0 - 2; x < x0 + total_w + 2; ++x) {
            if (x < 0 || y < 0 || x >= img.width || y >= img.height) continue;
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = 0.0f;
        }
    }
    for (size_t i = 0; i < digits.size(); ++i) {
        int digit = digits[i] - '0';
        int ox = x0 + int(i) * (gw + gap);
        for (int ry = 0; ry < 7; ++ry) {
            for (int rx = 0; rx < 5; ++rx) {
                if (!((kDigitFont[digit][ry] >> (4 - rx)) & 1)) continue;
                for (int sy = 0; sy < scale; ++sy) {
                    for (int sx = 0; sx < scale; ++sx) {
                        int x = ox + rx * scale + sx, y = y0 + ry * scale + sy;
                        if (x < 0 || y < 0 || x >= img.width || y >= img.height) continue;
                        for (int c = 0; c < 3; ++c) img.at(x, y, c) = 1.0f;
                    }
                }
            }
        }
    }
}

} // namespace

AnnotatedImage annotate_som(const RenderOutput& render, const std::vector<RegionMask>& masks) {
    AnnotatedImage out;
    out.image = render.color;
    std::vector<const RegionMask*> ordered;
    for (const RegionMask& mask : masks) ordered.push_back(&mask);
    std::sort(ordered.begin(), ordered.end(),
              [](const RegionMask* a, const RegionMask* b) { return a->label < b->label; });
    for (const RegionMask* mask : ordered) {
        int ax, ay;
        pole_of_inaccessibility(*mask, ax, ay);
        draw_label(out.image, mask->label, ax, ay);
        out.marks.push_back({mask->label, ax, ay});
    }
    return out;
}

} // namespace matforge
