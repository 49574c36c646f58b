import init, { exitCurve, clockCurves, circuitCurve } from "./pkg/harmonet_wasm.js";

const SAMPLES = 1500;
const $ = (id) => document.getElementById(id);

function plot(canvas, tmax, series) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 50;
  ctx.clearRect(0, 0, w, h);
  let top = 0;
  for (const s of series) for (const y of s.ys) top = Math.max(top, y);
  top = top > 0 ? top * 1.05 : 1;

  ctx.strokeStyle = "#888";
  ctx.fillStyle = "#444";
  ctx.font = "22px sans-serif";
  ctx.lineWidth = 1;
  ctx.strokeRect(pad, 10, w - pad - 10, h - pad - 10);
  ctx.fillText("0", pad - 20, h - pad + 25);
  ctx.fillText(tmax.toString(), w - 60, h - pad + 25);
  ctx.fillText(top.toPrecision(2), 2, 30);

  const x = (i, n) => pad + (i / (n - 1)) * (w - pad - 10);
  const y = (v) => h - pad - (v / top) * (h - pad - 20);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    s.ys.forEach((v, i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, x(i, s.ys.length), y(v)));
    ctx.stroke();
  }
}

function wire(prefix, run) {
  const go = () => {
    const msg = $(`${prefix}-msg`);
    msg.className = "";
    try {
      const t0 = performance.now();
      const note = run();
      msg.textContent = `${note} (${(performance.now() - t0).toFixed(0)} ms)`;
    } catch (e) {
      msg.className = "err";
      msg.textContent = e.message ?? String(e);
    }
  };
  $(`${prefix}-go`).addEventListener("click", go);
  go();
}

await init();

wire("gt", () => {
  const n = Number($("gt-n").value);
  const tmax = Number($("gt-t").value);
  const ys = exitCurve(n, tmax, SAMPLES);
  plot($("gt-plot"), tmax, [{ ys, color: "#1f77b4" }]);
  const peak = ys.reduce((a, b) => Math.max(a, b), 0);
  return `peak share ${peak.toFixed(4)}`;
});

wire("cl", () => {
  const gates = Number($("cl-l").value);
  const tmax = Number($("cl-t").value);
  const both = clockCurves(gates, tmax, SAMPLES);
  const uniform = both.subarray(0, SAMPLES);
  const engineered = both.subarray(SAMPLES);
  plot($("cl-plot"), tmax, [
    { ys: uniform, color: "#1f77b4" },
    { ys: engineered, color: "#d62728" },
  ]);
  const best = (a) => a.reduce((m, v) => Math.max(m, v), 0).toFixed(4);
  return `max uniform ${best(uniform)}, max engineered ${best(engineered)}`;
});

wire("ci", () => {
  const tmax = Number($("ci-t").value);
  const ys = circuitCurve($("ci-json").value, tmax, SAMPLES);
  plot($("ci-plot"), tmax, [{ ys, color: "#2ca02c" }]);
  const peak = ys.reduce((a, b) => Math.max(a, b), 0);
  return `peak output share ${peak.toFixed(4)}`;
});
