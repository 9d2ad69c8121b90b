#include "polarseg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "polarseg/parallel.hpp"
#include "polarseg/polar.hpp"
#include "polarseg/trainer.hpp"

namespace fs = std::filesystem;

namespace polarseg {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) fields.push_back(item);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

std::string resolve_path(const fs::path& base_dir, const std::string& p) {
    fs::path path(p);
    if (path.is_absolute()) return path.string();
    return (base_dir / path).string();
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

double secs_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

PolarConfig polar_config_for(const RunConfig& rc, double cu, double cv) {
    PolarConfig pc;
    pc.center_u = cu;
    pc.center_v = cv;
    pc.radius = rc.polar_radius;
    pc.angular_bins = rc.polar_angular_bins;
    pc.radial_bins = rc.polar_radial_bins;
    return pc;
}

Tensor masks_to_target(const Mask& disc, const Mask& cup) {
    Tensor t(Shape{1, 2, disc.height, disc.width});
    for (std::size_t i = 0; i < disc.pix.size(); ++i) {
        t.data[i] = disc.pix[i] ? 1.0f : 0.0f;
        t.data[disc.pix.size() + i] = cup.pix[i] ? 1.0f : 0.0f;
    }
    return t;
}

bool ellipse_inside(const EllipseParams& outer, const EllipseParams& inner) {
    const double c = std::cos(inner.phi), s = std::sin(inner.phi);
    const double oc = std::cos(outer.phi), os = std::sin(outer.phi);
    for (int i = 0; i < 64; ++i) {
        const double t = 2.0 * std::numbers::pi * i / 64.0;
        const double px = inner.cx + inner.a * std::cos(t) * c - inner.b * std::sin(t) * s;
        const double py = inner.cy + inner.a * std::cos(t) * s + inner.b * std::sin(t) * c;
        const double dx = px - outer.cx, dy = py - outer.cy;
        const double xr = (dx * oc + dy * os) / outer.a;
        const double yr = (-dx * os + dy * oc) / outer.b;
        if (xr * xr + yr * yr > 1.0) return false;
    }
    return true;
}

void write_record_txt(const std::string& path, const SegmentationRecord& r) {
    std::ofstream out(path);
    require(out.good(), "cannot write " + path);
    out << "disc_found=" << (r.disc_found ? 1 : 0) << "\n";
    out << "cup_found=" << (r.cup_found ? 1 : 0) << "\n";
    out << "containment_warning=" << (r.containment_warning ? 1 : 0) << "\n";
    out << "disc_ellipse=" << fmt(r.disc_ellipse.cx) << "," << fmt(r.disc_ellipse.cy) << ","
        << fmt(r.disc_ellipse.a) << "," << fmt(r.disc_ellipse.b) << ","
        << fmt(r.disc_ellipse.phi) << "\n";
    out << "cup_ellipse=" << fmt(r.cup_ellipse.cx) << "," << fmt(r.cup_ellipse.cy) << ","
        << fmt(r.cup_ellipse.a) << "," << fmt(r.cup_ellipse.b) << "," << fmt(r.cup_ellipse.phi)
        << "\n";
    out << "cdr=" << fmt(r.cdr) << "\n";
    out << "rdar=" << fmt(r.rdar) << "\n";
}

constexpr const char* kRecordsHeader =
    "stem,disc_found,cup_found,containment_warning,cdr,rdar,"
    "disc_cx,disc_cy,disc_a,disc_b,disc_phi,cup_cx,cup_cy,cup_a,cup_b,cup_phi";

void append_record_csv(std::ostream& out, const SegmentationRecord& r) {
    out << r.stem << "," << (r.disc_found ? 1 : 0) << "," << (r.cup_found ? 1 : 0) << ","
        << (r.containment_warning ? 1 : 0) << "," << fmt(r.cdr) << "," << fmt(r.rdar) << ","
        << fmt(r.disc_ellipse.cx) << "," << fmt(r.disc_ellipse.cy) << ","
        << fmt(r.disc_ellipse.a) << "," << fmt(r.disc_ellipse.b) << ","
        << fmt(r.disc_ellipse.phi) << "," << fmt(r.cup_ellipse.cx) << ","
        << fmt(r.cup_ellipse.cy) << "," << fmt(r.cup_ellipse.a) << "," << fmt(r.cup_ellipse.b)
        << "," << fmt(r.cup_ellipse.phi) << "\n";
}

}  // namespace

std::pair<double, double> estimate_disc_center(const Image& img) {
    // mean over channels, 5x5 box blur, centroid of the top 2% brightest
    Image mean(1, img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            float acc = 0.0f;
            for (int c = 0; c < img.channels; ++c) acc += img.at(c, y, x);
            mean.at(0, y, x) = acc / static_cast<float>(img.channels);
        }
    mean = box_blur(mean, 2);
    std::vector<float> sorted(mean.pix);
    const std::size_t keep = std::max<std::size_t>(1, sorted.size() / 50);
    std::nth_element(sorted.begin(), sorted.begin() + (sorted.size() - keep), sorted.end());
    const float cutoff = sorted[sorted.size() - keep];
    double su = 0.0, sv = 0.0, n = 0.0;
    for (int y = 0; y < mean.height; ++y)
        for (int x = 0; x < mean.width; ++x)
            if (mean.at(0, y, x) >= cutoff) {
                su += x;
                sv += y;
                n += 1.0;
            }
    return {su / n, sv / n};
}

SegmentationResult segment_image(const MNet& net, const Image& image, const RunConfig& rc,
                                 double center_u, double center_v) {
    const auto t0 = std::chrono::steady_clock::now();
    SegmentationResult res;

    Image prob_disc, prob_cup;
    if (rc.polar_enabled) {
        const PolarConfig pc = polar_config_for(rc, center_u, center_v);
        const Image polar_img = to_polar(image, pc);
        const MNetForward fwd = mnet_forward(net, image_to_tensor(polar_img));
        const Image fused = tensor_to_image(fwd.fused);
        // invert the probability maps before thresholding
        prob_disc = to_cartesian(take_channel(fused, 0), pc, image.height, image.width);
        prob_cup = to_cartesian(take_channel(fused, 1), pc, image.height, image.width);
    } else {
        const MNetForward fwd = mnet_forward(net, image_to_tensor(image));
        const Image fused = tensor_to_image(fwd.fused);
        prob_disc = take_channel(fused, 0);
        prob_cup = take_channel(fused, 1);
    }

    res.disc_raw = largest_connected_component(binarize(prob_disc, 0, rc.threshold));
    res.cup_raw = largest_connected_component(binarize(prob_cup, 0, rc.threshold));
    res.disc_mask = Mask(image.height, image.width);
    res.cup_mask = Mask(image.height, image.width);

    SegmentationRecord& r = res.record;
    if (!res.disc_raw.empty_mask()) {
        try {
            r.disc_ellipse = fit_ellipse(res.disc_raw);
            r.disc_found = true;
            res.disc_mask = rasterize_ellipse(r.disc_ellipse, image.height, image.width);
        } catch (const std::exception&) {
            r.disc_found = false;
        }
    }
    if (!res.cup_raw.empty_mask()) {
        try {
            r.cup_ellipse = fit_ellipse(res.cup_raw);
            r.cup_found = true;
            res.cup_mask = rasterize_ellipse(r.cup_ellipse, image.height, image.width);
        } catch (const std::exception&) {
            r.cup_found = false;
        }
    }
    if (r.disc_found && r.cup_found) {
        r.cdr = compute_cdr(r.disc_ellipse, r.cup_ellipse);
        r.containment_warning = !ellipse_inside(r.disc_ellipse, r.cup_ellipse);
    }
    if (r.disc_found)
        r.rdar = compute_rdar(res.disc_mask, res.cup_mask);
    r.seconds = secs_since(t0);
    return res;
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot read manifest " + path);
    const fs::path base = fs::path(path).parent_path();
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), path + ": empty manifest");
    require(split_csv_line(line).size() >= 7,
            path + ": expected header image,disc_mask,cup_mask,center_u,center_v,cdr,label");
    std::vector<ManifestRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        require(f.size() >= 7, path + ": malformed row '" + line + "'");
        ManifestRow row;
        row.image = resolve_path(base, f[0]);
        row.disc_mask = resolve_path(base, f[1]);
        row.cup_mask = resolve_path(base, f[2]);
        row.center_u = std::stod(f[3]);
        row.center_v = std::stod(f[4]);
        row.cdr = std::stod(f[5]);
        row.label = std::stoi(f[6]);
        row.stem = stem_of(f[0]);
        rows.push_back(std::move(row));
    }
    return rows;
}

int cmd_synth(const SynthArgs& args) {
    fs::create_directories(args.out_dir);
    const auto samples = generate(args.rc.synth, args.rc.synth_count);
    std::ofstream manifest(fs::path(args.out_dir) / "manifest.csv");
    require(manifest.good(), "cannot write manifest in " + args.out_dir);
    manifest << "image,disc_mask,cup_mask,center_u,center_v,cdr,label\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        char stem[32];
        std::snprintf(stem, sizeof(stem), "img_%04zu", i);
        const std::string img_name = std::string(stem) + ".png";
        const std::string disc_name = std::string(stem) + "_disc.png";
        const std::string cup_name = std::string(stem) + "_cup.png";
        write_png((fs::path(args.out_dir) / img_name).string(), samples[i].image);
        write_mask_png((fs::path(args.out_dir) / disc_name).string(), samples[i].disc);
        write_mask_png((fs::path(args.out_dir) / cup_name).string(), samples[i].cup);
        const int label = samples[i].cdr > args.rc.screen_cutoff ? 1 : 0;
        manifest << img_name << "," << disc_name << "," << cup_name << ","
                 << fmt(samples[i].center_u) << "," << fmt(samples[i].center_v) << ","
                 << fmt(samples[i].cdr) << "," << label << "\n";
    }
    write_config_file((fs::path(args.out_dir) / "config.resolved.txt").string(), args.rc);
    std::cout << "synth: wrote " << samples.size() << " samples to " << args.out_dir << "\n";
    return 0;
}

int cmd_polar(const PolarArgs& args) {
    fs::create_directories(args.out_dir);
    const Image img = read_png(args.image_path);
    double cu, cv;
    if (args.center) {
        cu = args.center->first;
        cv = args.center->second;
    } else {
        std::tie(cu, cv) = estimate_disc_center(img);
        std::cout << "polar: estimated disc center (" << fmt(cu) << "," << fmt(cv) << ")\n";
    }
    const PolarConfig pc = polar_config_for(args.rc, cu, cv);
    const Image polar_img = to_polar(img, pc);
    const std::string stem = stem_of(args.image_path);
    write_png((fs::path(args.out_dir) / (stem + "_polar.png")).string(), polar_img);
    write_polar_sidecar((fs::path(args.out_dir) / (stem + "_polar.txt")).string(), pc,
                        img.height, img.width);
    write_config_file((fs::path(args.out_dir) / "config.resolved.txt").string(), args.rc);
    return 0;
}

int cmd_train(const TrainArgs& args) {
    const auto t0 = std::chrono::steady_clock::now();
    fs::create_directories(args.out_dir);
    RunConfig rc = args.rc;
    rc.model.validate_and_normalize();
    const auto rows = read_manifest(args.manifest_path);
    require(!rows.empty(), "train: manifest has no samples");
    if (rc.polar_enabled)
        require(rc.polar_radial_bins == rc.model.input_size &&
                    rc.polar_angular_bins == rc.model.input_size,
                "train: polar bins must equal model.input_size (got " +
                    std::to_string(rc.polar_radial_bins) + "x" +
                    std::to_string(rc.polar_angular_bins) + " vs " +
                    std::to_string(rc.model.input_size) + ")");

    std::vector<TrainSample> samples(rows.size());
    parallel_for(static_cast<long>(rows.size()), [&](long b, long e) {
        for (long i = b; i < e; ++i) {
            const ManifestRow& row = rows[static_cast<std::size_t>(i)];
            const Image img = read_png(row.image);
            const Mask disc = read_mask_png(row.disc_mask);
            const Mask cup = read_mask_png(row.cup_mask);
            TrainSample s;
            if (rc.polar_enabled) {
                const PolarConfig pc = polar_config_for(rc, row.center_u, row.center_v);
                s.input = image_to_tensor(to_polar(img, pc));
                s.target = masks_to_target(to_polar_mask(disc, pc), to_polar_mask(cup, pc));
            } else {
                require(img.height == rc.model.input_size && img.width == rc.model.input_size,
                        "train: image size does not match model.input_size");
                s.input = image_to_tensor(img);
                s.target = masks_to_target(disc, cup);
            }
            samples[static_cast<std::size_t>(i)] = std::move(s);
        }
    });

    MNet net = build_mnet(rc.model);
    init_parameters(net.graph, rc.train.seed);
    OptState state = make_opt_state(net.graph);
    const TrainLog log = train(net, samples, rc.train, state);

    const long total = steps_per_epoch(samples.size(), rc.train.batch_size) *
                       rc.train.iterations;
    save_checkpoint((fs::path(args.out_dir) / "ckpt").string(), net, state, rc.train, total);

    std::ofstream curve(fs::path(args.out_dir) / "loss_curve.csv");
    require(curve.good(), "cannot write loss curve");
    curve << "step,total";
    for (std::size_t m = 0; m < net.side_nodes.size(); ++m) curve << ",side" << m + 1;
    curve << "\n";
    for (std::size_t i = 0; i < log.per_step.size(); ++i) {
        curve << log.first_step + static_cast<long>(i) << ","
              << fmt(log.per_step[i].total);
        for (float v : log.per_step[i].per_side) curve << "," << fmt(v);
        curve << "\n";
    }
    write_config_file((fs::path(args.out_dir) / "config.resolved.txt").string(), rc);

    std::cout << "train: " << total << " steps, final loss "
              << (log.per_step.empty() ? 0.0f : log.per_step.back().total) << ", "
              << fmt(secs_since(t0)) << " s, parameters "
              << net.graph.parameter_count() << "\n";
    return 0;
}

int cmd_segment(const SegmentArgs& args) {
    require(args.image_path.empty() != args.manifest_path.empty(),
            "segment: give exactly one of an image path or a manifest");
    fs::create_directories(args.out_dir);
    LoadedCheckpoint ck = load_checkpoint(args.weights_prefix);

    struct Job {
        std::string stem;
        Image image;
        double cu, cv;
    };
    std::vector<Job> jobs;
    if (!args.image_path.empty()) {
        Job j;
        j.stem = stem_of(args.image_path);
        j.image = read_png(args.image_path);
        if (args.center) {
            j.cu = args.center->first;
            j.cv = args.center->second;
        } else {
            std::tie(j.cu, j.cv) = estimate_disc_center(j.image);
            std::cout << "segment: estimated disc center (" << fmt(j.cu) << "," << fmt(j.cv)
                      << "); pass --center or a manifest to override\n";
        }
        jobs.push_back(std::move(j));
    } else {
        for (const ManifestRow& row : read_manifest(args.manifest_path)) {
            Job j;
            j.stem = row.stem;
            j.image = read_png(row.image);
            j.cu = row.center_u;
            j.cv = row.center_v;
            jobs.push_back(std::move(j));
        }
    }

    std::vector<SegmentationResult> results(jobs.size());
    parallel_for(static_cast<long>(jobs.size()), [&](long b, long e) {
        for (long i = b; i < e; ++i)
            results[static_cast<std::size_t>(i)] =
                segment_image(ck.net, jobs[static_cast<std::size_t>(i)].image, args.rc,
                              jobs[static_cast<std::size_t>(i)].cu,
                              jobs[static_cast<std::size_t>(i)].cv);
    });

    std::ofstream records(fs::path(args.out_dir) / "segment_records.csv");
    require(records.good(), "cannot write segment records");
    records << kRecordsHeader << "\n";
    double total_s = 0.0;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        SegmentationRecord& r = results[i].record;
        r.stem = jobs[i].stem;
        const fs::path dir(args.out_dir);
        write_mask_png((dir / (r.stem + "_disc.png")).string(), results[i].disc_mask);
        write_mask_png((dir / (r.stem + "_cup.png")).string(), results[i].cup_mask);
        write_mask_png((dir / (r.stem + "_disc_raw.png")).string(), results[i].disc_raw);
        write_mask_png((dir / (r.stem + "_cup_raw.png")).string(), results[i].cup_raw);
        write_record_txt((dir / (r.stem + "_record.txt")).string(), r);
        append_record_csv(records, r);
        total_s += r.seconds;
    }
    write_config_file((fs::path(args.out_dir) / "config.resolved.txt").string(), args.rc);
    std::cout << "segment: " << jobs.size() << " image(s), "
              << fmt(total_s / static_cast<double>(jobs.size())) << " s/image\n";
    return 0;
}

namespace {

struct RecordRow {
    double cdr = 0.0, rdar = 0.0;
    bool disc_found = false, cup_found = false;
};

}  // namespace

int cmd_eval(const EvalArgs& args) {
    const auto rows = read_manifest(args.manifest_path);
    require(!rows.empty(), "eval: manifest has no samples");

    // records written by the segment driver
    std::ifstream rin(fs::path(args.pred_dir) / "segment_records.csv");
    require(rin.good(), "eval: missing segment_records.csv in " + args.pred_dir);
    std::string line;
    std::getline(rin, line);
    std::vector<std::pair<std::string, RecordRow>> recs;
    while (std::getline(rin, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        require(f.size() >= 6, "eval: malformed record row '" + line + "'");
        RecordRow rr;
        rr.disc_found = f[1] == "1";
        rr.cup_found = f[2] == "1";
        rr.cdr = std::stod(f[4]);
        rr.rdar = std::stod(f[5]);
        recs.emplace_back(f[0], rr);
    }
    auto find_rec = [&](const std::string& stem) -> const RecordRow& {
        for (const auto& [s, rr] : recs)
            if (s == stem) return rr;
        throw std::runtime_error("eval: no segmentation record for '" + stem + "'");
    };

    std::ofstream out(args.out_csv);
    require(out.good(), "cannot write " + args.out_csv);
    out << "image,e_disc,a_disc,e_cup,a_cup,e_rim,a_rim,delta_e,cdr_s,cdr_g,rdar_s\n";
    EvalRecord mean;
    double rdar_mean = 0.0;
    const std::string suffix = args.use_raw_masks ? "_raw.png" : ".png";
    for (const ManifestRow& row : rows) {
        const Mask gt_disc = read_mask_png(row.disc_mask);
        const Mask gt_cup = read_mask_png(row.cup_mask);
        const Mask gt_rim = rim_mask(gt_disc, gt_cup);
        const fs::path dir(args.pred_dir);
        const Mask pr_disc = read_mask_png((dir / (row.stem + "_disc" + suffix)).string());
        const Mask pr_cup = read_mask_png((dir / (row.stem + "_cup" + suffix)).string());
        const Mask pr_rim = rim_mask(pr_disc, pr_cup);
        const RecordRow& rr = find_rec(row.stem);

        EvalRecord er;
        er.e_disc = overlap_error(pr_disc, gt_disc);
        er.a_disc = balanced_accuracy(pr_disc, gt_disc);
        er.e_cup = overlap_error(pr_cup, gt_cup);
        er.a_cup = balanced_accuracy(pr_cup, gt_cup);
        er.e_rim = overlap_error(pr_rim, gt_rim);
        er.a_rim = balanced_accuracy(pr_rim, gt_rim);
        er.cdr_s = rr.cdr;
        er.cdr_g = row.cdr;
        er.delta_e = cdr_error(er.cdr_s, er.cdr_g);

        out << row.stem << "," << fmt(er.e_disc) << "," << fmt(er.a_disc) << ","
            << fmt(er.e_cup) << "," << fmt(er.a_cup) << "," << fmt(er.e_rim) << ","
            << fmt(er.a_rim) << "," << fmt(er.delta_e) << "," << fmt(er.cdr_s) << ","
            << fmt(er.cdr_g) << "," << fmt(rr.rdar) << "\n";

        mean.e_disc += er.e_disc;
        mean.a_disc += er.a_disc;
        mean.e_cup += er.e_cup;
        mean.a_cup += er.a_cup;
        mean.e_rim += er.e_rim;
        mean.a_rim += er.a_rim;
        mean.delta_e += er.delta_e;
        mean.cdr_s += er.cdr_s;
        mean.cdr_g += er.cdr_g;
        rdar_mean += rr.rdar;
    }
    const double n = static_cast<double>(rows.size());
    out << "mean," << fmt(mean.e_disc / n) << "," << fmt(mean.a_disc / n) << ","
        << fmt(mean.e_cup / n) << "," << fmt(mean.a_cup / n) << "," << fmt(mean.e_rim / n)
        << "," << fmt(mean.a_rim / n) << "," << fmt(mean.delta_e / n) << ","
        << fmt(mean.cdr_s / n) << "," << fmt(mean.cdr_g / n) << "," << fmt(rdar_mean / n)
        << "\n";
    std::cout << "eval: mean E_disc " << fmt(mean.e_disc / n) << ", E_cup "
              << fmt(mean.e_cup / n) << ", delta_E " << fmt(mean.delta_e / n) << "\n";
    return 0;
}

int cmd_screen(const ScreenArgs& args) {
    require(args.score == "cdr" || args.score == "rdar",
            "screen: score must be 'cdr' or 'rdar'");
    const auto rows = read_manifest(args.manifest_path);
    std::ifstream in(args.eval_csv);
    require(in.good(), "cannot read " + args.eval_csv);
    std::string line;
    std::getline(in, line);  // header
    std::vector<std::pair<std::string, std::pair<double, double>>> table;  // stem -> (cdr, rdar)
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.empty() || f[0] == "mean") continue;
        require(f.size() >= 11, "screen: malformed eval row '" + line + "'");
        table.emplace_back(f[0], std::make_pair(std::stod(f[8]), std::stod(f[10])));
    }
    std::vector<double> scores;
    std::vector<int> labels;
    for (const ManifestRow& row : rows) {
        for (const auto& [stem, vals] : table)
            if (stem == row.stem) {
                // less rim area means higher risk, so rdar screens negated
                scores.push_back(args.score == "cdr" ? vals.first : -vals.second);
                labels.push_back(row.label);
                break;
            }
    }
    require(scores.size() == rows.size(), "screen: eval csv does not cover the manifest");
    const RocCurve roc = roc_auc(scores, labels);

    std::ofstream out(args.out_csv);
    require(out.good(), "cannot write " + args.out_csv);
    out << "fpr,tpr\n";
    for (const auto& [fpr, tpr] : roc.points) out << fmt(fpr) << "," << fmt(tpr) << "\n";
    std::ofstream auc_out(fs::path(args.out_csv).parent_path() / "auc.txt");
    auc_out << "auc=" << fmt(roc.auc) << "\n";
    std::cout << "screen: AUC " << fmt(roc.auc) << " over " << scores.size() << " images ("
              << args.score << ")\n";
    return 0;
}

}  // namespace polarseg
