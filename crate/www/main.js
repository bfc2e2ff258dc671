// Demo page wiring: read the controls, call into the wasm module, draw the
// returned JSON onto the canvases. No framework, no dependencies.

import init, { snapshot_stats, flood_curve, expansion_probe } from "./pkg/churngraph_web.js";

const $ = (id) => document.getElementById(id);
const status = (msg) => { $("status").textContent = msg; };

function params() {
  return {
    model: $("model").value,
    n: BigInt(Math.max(2, Math.min(4096, Number($("n").value) | 0))),
    d: Math.max(1, Math.min(64, Number($("d").value) | 0)),
    seed: BigInt(Math.max(0, Number($("seed").value) | 0)),
    variant: $("variant").value,
  };
}

function clearCanvas(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  return ctx;
}

const PAD = { l: 46, r: 12, t: 10, b: 24 };

function frame(ctx, canvas, xMax, yMax, xLabel) {
  const { width: W, height: H } = canvas;
  ctx.strokeStyle = "#888";
  ctx.lineWidth = 1;
  ctx.strokeRect(PAD.l, PAD.t, W - PAD.l - PAD.r, H - PAD.t - PAD.b);
  ctx.fillStyle = "#888";
  ctx.font = "11px system-ui";
  ctx.textAlign = "center";
  ctx.fillText(xLabel, (PAD.l + W - PAD.r) / 2, H - 6);
  ctx.textAlign = "right";
  for (const f of [0, 0.5, 1]) {
    const y = PAD.t + (1 - f) * (H - PAD.t - PAD.b);
    ctx.fillText((yMax * f).toPrecision(3), PAD.l - 4, y + 4);
  }
  ctx.textAlign = "center";
  ctx.fillText("0", PAD.l, H - PAD.b + 14);
  ctx.fillText(String(xMax), W - PAD.r, H - PAD.b + 14);
  return {
    x: (v) => PAD.l + (v / xMax) * (W - PAD.l - PAD.r),
    y: (v) => PAD.t + (1 - v / yMax) * (H - PAD.t - PAD.b),
  };
}

function drawLine(ctx, map, points, color) {
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  points.forEach(([x, y], i) => (i ? ctx.lineTo(map.x(x), map.y(y)) : ctx.moveTo(map.x(x), map.y(y))));
  ctx.stroke();
}

function showRaw(obj) {
  $("raw").textContent = JSON.stringify(obj, null, 2);
}

async function runFlood() {
  const p = params();
  status("flooding…");
  await tick();
  const data = JSON.parse(flood_curve(p.model, p.n, p.d, p.seed, p.variant, 64));
  const rows = data.rows;
  const canvas = $("flood-canvas");
  const ctx = clearCanvas(canvas);
  const xMax = Math.max(1, rows[rows.length - 1].t);
  const map = frame(ctx, canvas, xMax, 1, "time units after the source joins");
  drawLine(ctx, map, rows.map((r) => [r.t, r.fraction]), "#d0433e");
  const done = data.completed_at_offset;
  $("flood-note").textContent = done == null
    ? `No completion within ${xMax} steps (final fraction ${(rows[rows.length - 1].fraction).toFixed(3)}).`
    : `Broadcast completed ${done} time units after the source joined.`;
  showRaw(data);
  status("");
}

async function runStats() {
  const p = params();
  status("simulating…");
  await tick();
  const data = JSON.parse(snapshot_stats(p.model, p.n, p.d, p.seed));
  const hist = data.histogram;
  const canvas = $("stats-canvas");
  const ctx = clearCanvas(canvas);
  const yMax = Math.max(...hist, 1);
  const map = frame(ctx, canvas, hist.length, yMax, "degree");
  ctx.fillStyle = "#3e7bd0";
  const bw = (map.x(1) - map.x(0)) * 0.9;
  hist.forEach((count, k) => {
    const x = map.x(k);
    const y = map.y(count);
    ctx.fillRect(x, y, Math.max(1, bw), map.y(0) - y);
  });
  $("stats-note").textContent =
    `${data.nodes} nodes, ${data.edges} edges; mean degree ${data.mean_degree.toFixed(2)}, ` +
    `max ${data.max_degree}, isolated ${data.isolated}.`;
  showRaw(data);
  status("");
}

async function runExpansion() {
  const p = params();
  status("sampling subsets…");
  await tick();
  const data = JSON.parse(expansion_probe(p.model, p.n, p.d, p.seed, 4000));
  const curve = data.curve;
  const canvas = $("exp-canvas");
  const ctx = clearCanvas(canvas);
  const xMax = curve[curve.length - 1].max_size;
  const yMax = Math.max(1, ...curve.map((c) => c.h_out)) * 1.1;
  const map = frame(ctx, canvas, xMax, yMax, "subset size |S|");
  // the 0.1 expander reference line
  ctx.save();
  ctx.setLineDash([6, 4]);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(map.x(0), map.y(0.1));
  ctx.lineTo(map.x(xMax), map.y(0.1));
  ctx.stroke();
  ctx.restore();
  drawLine(ctx, map, curve.map((c) => [(c.min_size + c.max_size) / 2, c.h_out]), "#3ea06b");
  $("exp-note").textContent =
    `Overall sampled h_out = ${data.h_out_sampled.toFixed(3)} ` +
    `(worst subset of ${data.witness_size} nodes among the samples).`;
  showRaw(data);
  status("");
}

const tick = () => new Promise((r) => setTimeout(r, 16));

function guard(fn) {
  return () => fn().catch((e) => { status(""); alert(e); });
}

init().then(() => {
  $("run-flood").addEventListener("click", guard(runFlood));
  $("run-stats").addEventListener("click", guard(runStats));
  $("run-expansion").addEventListener("click", guard(runExpansion));
  status("ready");
});
