#include "mocos/errors.hpp"
#include "mocos/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace mocos {

namespace {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string join_indices(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> out;
    for (std::string tok; is >> tok;) out.push_back(tok);
    return out;
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

int parse_int(const std::string& s, std::size_t line, const char* what) {
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ParseError(line, std::string("bad ") + what + " '" + s + "'");
    return v;
}

std::vector<int> parse_index_list(const std::string& csv, std::size_t line) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        const std::size_t comma = std::min(csv.find(',', pos), csv.size());
        out.push_back(parse_int(csv.substr(pos, comma - pos), line, "joint index"));
        pos = comma + 1;
    }
    return out;
}

const char* split_name(int part) { return part == 0 ? "train" : part == 1 ? "probe" : "gallery"; }

} // namespace

void write_dataset(const Dataset& data, std::ostream& out) {
    data.layout.validate();
    const bool builtin = builtin_layout(data.layout.name).has_value();
    out << "SKL1 J=" << data.layout.joints << " K=" << (builtin ? data.layout.name : std::string("custom")) << '\n';
    if (data.limbs)
        out << "limbs upper=" << join_indices(data.limbs->upper) << " lower=" << join_indices(data.limbs->lower)
            << '\n';
    if (!builtin) {
        out << "edges";
        for (const auto& [a, b] : data.layout.edges) out << ' ' << a << '-' << b;
        out << '\n';
    }
    const std::vector<SkeletonSequence>* parts[] = {&data.split.train, &data.split.probe, &data.split.gallery};
    for (int part = 0; part < 3; ++part) {
        for (const SkeletonSequence& s : *parts[part]) {
            if (s.joint_count() != static_cast<std::size_t>(data.layout.joints))
                throw ValidationError("sequence '" + s.seq_id + "' has " + std::to_string(s.joint_count()) +
                                      " joints, layout has " + std::to_string(data.layout.joints));
            out << "seq " << s.seq_id << " label " << s.label << " split " << split_name(part) << " frames "
                << s.frame_count() << '\n';
            for (std::size_t t = 0; t < s.frame_count(); ++t) {
                const auto row = s.frames.row_span(t);
                for (std::size_t i = 0; i < row.size(); ++i) {
                    if (i) out << ' ';
                    out << format_double(row[i]);
                }
                out << '\n';
            }
        }
    }
}

void write_dataset(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    write_dataset(data, out);
    if (!out) throw ValidationError("failed writing '" + path + "'");
}

Dataset read_dataset(std::istream& in) {
    Dataset data;
    std::string line;
    std::size_t lineno = 0;

    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.find_first_not_of(" \t") != std::string::npos) return true;
        }
        return false;
    };

    if (!next_line()) throw ParseError(lineno, "empty file");
    {
        const auto tok = split_ws(line);
        if (tok.size() != 3 || tok[0] != "SKL1" || !starts_with(tok[1], "J=") || !starts_with(tok[2], "K="))
            throw ParseError(lineno, "malformed header, expected 'SKL1 J=<J> K=<layout>'");
        data.layout.joints = parse_int(tok[1].substr(2), lineno, "joint count");
        data.layout.name = tok[2].substr(2);
        if (data.layout.joints < 2) throw ParseError(lineno, "joint count must be >= 2");
    }

    bool have_edges = false;
    bool more = next_line();
    while (more && !starts_with(line, "seq ")) {
        const auto tok = split_ws(line);
        if (tok[0] == "limbs") {
            if (tok.size() != 3 || !starts_with(tok[1], "upper=") || !starts_with(tok[2], "lower="))
                throw ParseError(lineno, "malformed limbs line, expected 'limbs upper=<csv> lower=<csv>'");
            data.limbs = LimbSets{parse_index_list(tok[1].substr(6), lineno), parse_index_list(tok[2].substr(6), lineno)};
            try {
                data.limbs->validate(data.layout.joints);
            } catch (const ValidationError& e) {
                throw ParseError(lineno, e.what());
            }
        } else if (tok[0] == "edges") {
            for (std::size_t i = 1; i < tok.size(); ++i) {
                const auto dash = tok[i].find('-');
                if (dash == std::string::npos) throw ParseError(lineno, "bad edge '" + tok[i] + "'");
                data.layout.edges.emplace_back(parse_int(tok[i].substr(0, dash), lineno, "edge endpoint"),
                                               parse_int(tok[i].substr(dash + 1), lineno, "edge endpoint"));
            }
            have_edges = true;
        } else {
            throw ParseError(lineno, "unexpected line '" + tok[0] + "'");
        }
        more = next_line();
    }

    if (data.layout.name == "custom") {
        if (!have_edges) throw ParseError(1, "custom layout requires an 'edges' line");
    } else {
        const auto builtin = builtin_layout(data.layout.name);
        if (!builtin) throw ParseError(1, "unknown layout '" + data.layout.name + "'");
        if (builtin->joints != data.layout.joints)
            throw ParseError(1, "layout '" + data.layout.name + "' has " + std::to_string(builtin->joints) +
                                    " joints but header says J=" + std::to_string(data.layout.joints));
        if (have_edges && data.layout.edges != builtin->edges)
            throw ParseError(1, "edges line disagrees with built-in layout '" + data.layout.name + "'");
        data.layout.edges = builtin->edges;
    }
    try {
        data.layout.validate();
    } catch (const ValidationError& e) {
        throw ParseError(1, e.what());
    }

    const std::size_t values_per_frame = 3 * static_cast<std::size_t>(data.layout.joints);
    while (more) {
        const auto tok = split_ws(line);
        if (tok.size() != 8 || tok[0] != "seq" || tok[2] != "label" || tok[4] != "split" || tok[6] != "frames")
            throw ParseError(lineno, "malformed sequence line, expected 'seq <id> label <y> split <s> frames <f>'");
        SkeletonSequence seq;
        seq.seq_id = tok[1];
        seq.label = parse_int(tok[3], lineno, "label");
        if (seq.label < 1) throw ParseError(lineno, "label must be >= 1");
        std::vector<SkeletonSequence>* target = nullptr;
        if (tok[5] == "train") target = &data.split.train;
        else if (tok[5] == "probe") target = &data.split.probe;
        else if (tok[5] == "gallery") target = &data.split.gallery;
        else throw ParseError(lineno, "unknown split '" + tok[5] + "'");
        const int frames = parse_int(tok[7], lineno, "frame count");
        if (frames < 1) throw ParseError(lineno, "frame count must be >= 1");

        seq.frames = Matrix::matrix(static_cast<std::size_t>(frames), values_per_frame);
        for (int t = 0; t < frames; ++t) {
            if (!next_line()) throw ParseError(lineno, "sequence '" + seq.seq_id + "' ends before its frames");
            std::vector<double> values;
            const char* p = line.data();
            const char* end = line.data() + line.size();
            while (true) {
                while (p < end && (*p == ' ' || *p == '\t')) ++p;
                if (p == end) break;
                double v = 0.0;
                const auto res = std::from_chars(p, end, v);
                if (res.ec != std::errc() || (res.ptr != end && *res.ptr != ' ' && *res.ptr != '\t'))
                    throw ParseError(lineno, "bad coordinate value");
                if (!std::isfinite(v)) throw ParseError(lineno, "non-finite coordinate");
                values.push_back(v);
                p = res.ptr;
            }
            if (values.size() != values_per_frame)
                throw ParseError(lineno, "frame has " + std::to_string(values.size()) + " values, expected 3*J = " +
                                             std::to_string(values_per_frame));
            std::copy(values.begin(), values.end(), seq.frames.row_span(static_cast<std::size_t>(t)).begin());
        }
        target->push_back(std::move(seq));
        more = next_line();
    }

    if (data.split.train.empty()) throw ParseError(lineno, "dataset has no training sequences");
    int max_label = 0;
    for (const auto& s : data.split.train) max_label = std::max(max_label, s.label);
    data.split.classes = static_cast<std::size_t>(max_label);
    try {
        data.split.validate();
    } catch (const ValidationError& e) {
        throw ParseError(lineno, e.what());
    }
    return data;
}

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open dataset '" + path + "'");
    return read_dataset(in);
}

} // namespace mocos
