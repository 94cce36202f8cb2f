// The IO standard library. It holds ambient host authority.
#include <fstream>
#include <iostream>
#include <sstream>

#include "lbac/library.hpp"

namespace lbac {

std::string RealHostIo::read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EffectError("IoFailure", "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void RealHostIo::write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << contents)) throw EffectError("IoFailure", "cannot write " + path);
}

void RealHostIo::append_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out || !(out << contents)) throw EffectError("IoFailure", "cannot append to " + path);
}

void RealHostIo::put_line(const std::string& line) { std::cout << line << '\n'; }

std::string RealHostIo::read_line() {
  std::string line;
  std::getline(std::cin, line);
  return line;
}

std::string MemoryHostIo::read_file(const std::string& path) {
  auto it = files.find(path);
  if (it == files.end()) throw EffectError("IoFailure", "no such file " + path);
  return it->second;
}

void MemoryHostIo::write_file(const std::string& path, const std::string& contents) {
  files[path] = contents;
}

void MemoryHostIo::append_file(const std::string& path, const std::string& contents) {
  files[path] += contents;
}

void MemoryHostIo::put_line(const std::string& line) { output.push_back(line); }

std::string MemoryHostIo::read_line() {
  if (input.empty()) return "";
  std::string line = input.front();
  input.erase(input.begin());
  return line;
}

void Library::install_io() {
  register_alias("FilePath", t_string());
  register_effect("IO", {}, [](const nlohmann::json& options) -> std::shared_ptr<EffectState> {
    if (options.value("host", std::string("real")) == "memory") {
      return std::make_shared<IoState>(std::make_shared<MemoryHostIo>());
    }
    return std::make_shared<IoState>(std::make_shared<RealHostIo>());
  });

  auto def = [&](const std::string& name, const std::string& type, const std::string& doc,
                 std::function<Value(PrimCall&, HostIo&)> body) {
    add_primitive(make_prim(registry_, name, type, doc, [body](PrimCall& c) {
      c.interp.note_host_effect();
      return body(c, *c.ctx->state_as<IoState>().host);
    }));
  };

  def("writeFile", "FilePath -> String -> IO ()", "overwrite a file",
      [](PrimCall& c, HostIo& h) {
        h.write_file(c.args[0].as_string(), c.args[1].as_string());
        return Value::unit();
      });
  def("appendFile", "FilePath -> String -> IO ()", "append to a file",
      [](PrimCall& c, HostIo& h) {
        h.append_file(c.args[0].as_string(), c.args[1].as_string());
        return Value::unit();
      });
  def("readFile", "FilePath -> IO String", "read a whole file",
      [](PrimCall& c, HostIo& h) { return Value::string(h.read_file(c.args[0].as_string())); });
  def("putStrLn", "String -> IO ()", "print a line", [](PrimCall& c, HostIo& h) {
    h.put_line(c.args[0].as_string());
    return Value::unit();
  });
  def("print", "a -> IO ()", "print a value", [](PrimCall& c, HostIo& h) {
    h.put_line(c.args[0].is_string() ? c.args[0].as_string() : show_value(c.args[0]));
    return Value::unit();
  });
  def("readLine", "IO String", "read a line from the console",
      [](PrimCall&, HostIo& h) { return Value::string(h.read_line()); });
  def("system", "String -> IO Int", "run a shell command (disabled in this runtime)",
      [](PrimCall& c, HostIo&) -> Value {
        throw EffectError("Disabled", "system is disabled: " + c.args[0].as_string());
      });
}

}  // namespace lbac
