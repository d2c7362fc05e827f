#include "xtalk/circuit.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace xtalk {

char pauli_char(Pauli p) { return "IXZY"[static_cast<unsigned>(p)]; }

double PauliChannel::total_probability() const {
  double total = 0.0;
  for (const auto& t : terms) total += t.probability;
  return total;
}

std::uint32_t NoisyCircuit::measure(QubitId q) {
  ops.push_back({OpKind::measure, q, kNoQubit, num_records});
  return num_records++;
}

void NoisyCircuit::add_channel(PauliChannel channel) {
  if (channel.total_probability() <= 0.0) return;
  for (const auto& t : channel.terms) {
    if (t.probability < 0.0) throw std::invalid_argument("negative channel probability");
  }
  if (channel.total_probability() > 1.0 + 1e-12) throw std::invalid_argument("channel probability exceeds 1");
  ops.push_back({OpKind::channel, channel.q0, channel.q1, static_cast<std::uint32_t>(channels.size())});
  channels.push_back(std::move(channel));
}

void NoisyCircuit::tick(double duration) {
  if (!(duration >= 0.0)) throw std::invalid_argument("tick duration must be nonnegative");
  ops.push_back({OpKind::tick, kNoQubit, kNoQubit, static_cast<std::uint32_t>(tick_durations.size())});
  tick_durations.push_back(duration);
}

double NoisyCircuit::duration() const {
  double t = 0.0;
  for (double d : tick_durations) t += d;
  return t;
}

std::string NoisyCircuit::dump() const {
  std::ostringstream out;
  out.precision(17);
  for (const Op& op : ops) {
    switch (op.kind) {
      case OpKind::reset: out << "R " << op.a << '\n'; break;
      case OpKind::hadamard: out << "H " << op.a << '\n'; break;
      case OpKind::cnot: out << "CX " << op.a << ' ' << op.b << '\n'; break;
      case OpKind::measure: out << "M " << op.a << " rec[" << op.index << "]\n"; break;
      case OpKind::tick: out << "TICK " << tick_durations[op.index] << '\n'; break;
      case OpKind::channel: {
        const auto& ch = channels[op.index];
        static constexpr const char* kKind[] = {"GATE", "IDLE", "XTALK"};
        out << "PAULI_CHANNEL_" << kKind[static_cast<int>(ch.kind)] << ' ' << ch.q0;
        if (ch.q1 != kNoQubit) out << ' ' << ch.q1;
        for (const auto& t : ch.terms) {
          out << ' ' << pauli_char(t.first);
          if (ch.q1 != kNoQubit) out << pauli_char(t.second);
          out << ':' << t.probability;
        }
        out << '\n';
        break;
      }
    }
  }
  for (std::size_t i = 0; i < detectors.size(); ++i) {
    out << "DETECTOR " << i;
    for (auto r : detectors[i]) out << " rec[" << r << ']';
    out << '\n';
  }
  out << "OBSERVABLE";
  for (auto r : observable) out << " rec[" << r << ']';
  out << '\n';
  return out.str();
}

void PauliFrame::apply(QubitId q, Pauli p) {
  x[q] ^= has_x(p) ? 1 : 0;
  z[q] ^= has_z(p) ? 1 : 0;
}

Pauli PauliFrame::at(QubitId q) const { return static_cast<Pauli>(x[q] | (z[q] << 1)); }

std::size_t PauliFrame::weight() const {
  std::size_t w = 0;
  for (std::size_t q = 0; q < x.size(); ++q) w += (x[q] | z[q]) ? 1 : 0;
  return w;
}

void propagate_frame(const NoisyCircuit& circuit, PauliFrame& frame, std::size_t begin, std::size_t end) {
  end = std::min(end, circuit.ops.size());
  for (std::size_t i = begin; i < end; ++i) {
    const Op& op = circuit.ops[i];
    switch (op.kind) {
      case OpKind::reset: frame.x[op.a] = frame.z[op.a] = 0; break;
      case OpKind::hadamard: std::swap(frame.x[op.a], frame.z[op.a]); break;
      case OpKind::cnot:
        frame.x[op.b] ^= frame.x[op.a];
        frame.z[op.a] ^= frame.z[op.b];
        break;
      default: break;
    }
  }
}

}  // namespace xtalk
