#pragma once

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "codemt/ast.hpp"
#include "codemt/interp.hpp"

#include <json.hpp>

namespace codemt {

// Adapter for real-language toolchains. The child receives the argument tuple
// as JSON on stdin and must answer with a JSON object on stdout:
//   {"status":"ok","value":<value>,"mutated":[<value>...]}
//   {"status":"raised","message":"..."}
struct Toolchain {
    std::string name;
    std::string compile_cmd;  // may be empty; "{source}" expands to the source path
    std::string run_cmd;      // "{source}" expands to the source path
    bool reentrant = true;

    static Toolchain from_json(const nlohmann::json& j) {
        Toolchain tc;
        tc.name = j.at("name").get<std::string>();
        tc.compile_cmd = j.value("compile_cmd", std::string());
        tc.run_cmd = j.at("run_cmd").get<std::string>();
        tc.reentrant = j.value("reentrant", true);
        return tc;
    }

    static Toolchain load(const std::string& manifest_path) {
        return from_json(nlohmann::json::parse(read_file(manifest_path)));
    }
};

namespace detail {

struct ChildResult {
    int exit_code = 0;
    bool timed_out = false;
    std::string out;
    std::string err;
};

inline ChildResult run_shell(const std::string& command, const std::string& stdin_data,
                             const std::string& workdir, double timeout_s) {
    int in_pipe[2], out_pipe[2], err_pipe[2];
    if (pipe(in_pipe) || pipe(out_pipe) || pipe(err_pipe)) {
        throw Error("pipe() failed");
    }
    pid_t pid = fork();
    if (pid < 0) throw Error("fork() failed");
    if (pid == 0) {
        setpgid(0, 0);
        dup2(in_pipe[0], 0);
        dup2(out_pipe[1], 1);
        dup2(err_pipe[1], 2);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        close(err_pipe[0]);
        close(err_pipe[1]);
        if (!workdir.empty() && chdir(workdir.c_str()) != 0) _exit(126);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    close(err_pipe[1]);

    // Feed stdin, then close so the child sees EOF.
    std::size_t written = 0;
    while (written < stdin_data.size()) {
        ssize_t n = write(in_pipe[1], stdin_data.data() + written, stdin_data.size() - written);
        if (n <= 0) break;
        written += static_cast<std::size_t>(n);
    }
    close(in_pipe[1]);

    fcntl(out_pipe[0], F_SETFL, O_NONBLOCK);
    fcntl(err_pipe[0], F_SETFL, O_NONBLOCK);

    ChildResult result;
    auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
    auto drain = [&](int fd, std::string& sink) {
        char buf[4096];
        for (;;) {
            ssize_t n = read(fd, buf, sizeof(buf));
            if (n <= 0) break;
            sink.append(buf, static_cast<std::size_t>(n));
        }
    };
    int status = 0;
    for (;;) {
        pid_t done = waitpid(pid, &status, WNOHANG);
        drain(out_pipe[0], result.out);
        drain(err_pipe[0], result.err);
        if (done == pid) break;
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(-pid, SIGKILL);
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
            result.timed_out = true;
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    drain(out_pipe[0], result.out);
    drain(err_pipe[0], result.err);
    close(out_pipe[0]);
    close(err_pipe[0]);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128;
    return result;
}

inline std::string substitute(const std::string& tmpl, const std::string& key, const std::string& value) {
    std::string out = tmpl;
    std::size_t at;
    while ((at = out.find(key)) != std::string::npos) out.replace(at, key.size(), value);
    return out;
}

inline std::mutex& toolchain_lock(const std::string& name) {
    static std::mutex registry_mu;
    static std::map<std::string, std::mutex> locks;
    std::lock_guard<std::mutex> g(registry_mu);
    return locks[name];
}

}  // namespace detail

inline RunResult external_run(const Toolchain& tc, const std::string& source,
                              const std::vector<Value>& args, double timeout_s,
                              const std::string& workdir_hint = "") {
    namespace fs = std::filesystem;
    auto t0 = std::chrono::steady_clock::now();

    std::unique_lock<std::mutex> serial;
    if (!tc.reentrant) serial = std::unique_lock<std::mutex>(detail::toolchain_lock(tc.name));

    fs::path workdir = workdir_hint.empty()
                           ? fs::temp_directory_path() / ("codemt_run_" + std::to_string(getpid()) + "_" +
                                                          std::to_string(reinterpret_cast<std::uintptr_t>(&tc)))
                           : fs::path(workdir_hint);
    fs::create_directories(workdir);
    fs::path src_path = workdir / "candidate.src";
    write_file(src_path.string(), source);

    RunResult result;
    auto finish = [&](RunResult r) {
        auto t1 = std::chrono::steady_clock::now();
        r.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
        if (workdir_hint.empty()) {
            std::error_code ec;
            fs::remove_all(workdir, ec);
        }
        return r;
    };

    if (!tc.compile_cmd.empty()) {
        std::string cmd = detail::substitute(tc.compile_cmd, "{source}", src_path.string());
        auto comp = detail::run_shell(cmd, "", workdir.string(), timeout_s);
        if (comp.exit_code == 127) throw ToolchainMissing("toolchain '" + tc.name + "': " + cmd);
        if (comp.timed_out) {
            result.status = RunResult::Status::TimedOut;
            result.message = "compile step timed out";
            return finish(result);
        }
        if (comp.exit_code != 0) {
            result.status = RunResult::Status::ParseFailed;
            result.message = comp.err.empty() ? "compile failed" : comp.err;
            return finish(result);
        }
    }

    nlohmann::json in;
    in["args"] = nlohmann::json::array();
    for (const auto& a : args) in["args"].push_back(value_to_json(a));

    std::string cmd = detail::substitute(tc.run_cmd, "{source}", src_path.string());
    auto run = detail::run_shell(cmd, in.dump(), workdir.string(), timeout_s);
    if (run.exit_code == 127) throw ToolchainMissing("toolchain '" + tc.name + "': " + cmd);
    if (run.timed_out) {
        result.status = RunResult::Status::TimedOut;
        result.message = "wall clock timeout";
        return finish(result);
    }
    if (run.exit_code != 0) {
        result.status = RunResult::Status::Raised;
        result.message = run.err.empty() ? ("exit code " + std::to_string(run.exit_code)) : run.err;
        return finish(result);
    }
    try {
        auto j = nlohmann::json::parse(run.out);
        std::string status = j.value("status", std::string("ok"));
        if (status == "ok") {
            result.status = RunResult::Status::Ok;
            if (j.contains("value")) result.value = value_from_json(j.at("value"));
            if (j.contains("mutated")) {
                for (const auto& m : j.at("mutated")) result.mutated_args.push_back(value_from_json(m));
            }
        } else {
            result.status = RunResult::Status::Raised;
            result.message = j.value("message", std::string("raised"));
        }
    } catch (const nlohmann::json::exception& e) {
        result.status = RunResult::Status::Raised;
        result.message = std::string("malformed toolchain output: ") + e.what();
    }
    return finish(result);
}

}  // namespace codemt
