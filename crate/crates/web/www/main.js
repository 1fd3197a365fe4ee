import init, { stability_demo, handeye_demo, fusion_demo } from "./pkg/stickpose_web.js";

const COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c"];
const num = (id) => Number(document.getElementById(id).value);
const fmt = (x) => (Number.isFinite(x) ? x.toFixed(3) : String(x));

function plotLines(canvas, lines, yLabel) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 40;
  ctx.clearRect(0, 0, w, h);
  const xs = lines.flatMap((l) => l.x), ys = lines.flatMap((l) => l.y);
  if (!xs.length) return;
  const x0 = Math.min(...xs), x1 = Math.max(...xs) || 1;
  const y1 = Math.max(...ys) * 1.05 || 1;
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad + 10 - (y / y1) * (h - pad - 10);

  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.beginPath();
  ctx.moveTo(pad, 5);
  ctx.lineTo(pad, h - pad + 10);
  ctx.lineTo(w - pad, h - pad + 10);
  ctx.stroke();
  ctx.fillText(y1.toFixed(2), 2, 14);
  ctx.fillText("0", pad - 12, h - pad + 10);
  ctx.fillText(yLabel, pad + 4, 14);
  ctx.fillText(x0.toFixed(1), pad, h - pad + 24);
  ctx.fillText(x1.toFixed(1), w - pad - 20, h - pad + 24);

  lines.forEach((l, i) => {
    ctx.strokeStyle = l.color || COLORS[i % COLORS.length];
    ctx.beginPath();
    l.x.forEach((x, k) => (k ? ctx.lineTo(sx(x), sy(l.y[k])) : ctx.moveTo(sx(x), sy(l.y[k]))));
    if (l.points) {
      l.x.forEach((x, k) => ctx.fillRect(sx(x) - 2, sy(l.y[k]) - 2, 4, 4));
    } else {
      ctx.stroke();
    }
  });
}

function guard(outId, f) {
  return () => {
    const out = document.getElementById(outId);
    out.textContent = "running...";
    setTimeout(() => {
      try {
        f(out);
      } catch (e) {
        out.textContent = "error: " + e;
      }
    }, 10);
  };
}

function runStability(out) {
  const r = JSON.parse(stability_demo(num("st-seed"), num("st-period"), num("st-sigma-mm"), num("st-sigma-deg")));
  plotLines(document.getElementById("st-plot"), [{ x: r.series.t, y: r.series.mm }], "deviation [mm] vs t [s]");
  out.textContent =
    `samples ${r.samples}\n` +
    `max ${fmt(r.max.mm)} mm / ${fmt(r.max.deg)} deg\n` +
    `std ${fmt(r.std.mm)} mm / ${fmt(r.std.deg)} deg`;
}

function runHandeye(out) {
  const r = JSON.parse(handeye_demo(num("he-seed"), num("he-stations"), num("he-set"), num("he-reps")));
  const idx = r.raw.map((_, i) => i + 1);
  plotLines(
    document.getElementById("he-plot"),
    [
      { x: idx, y: r.raw.map((e) => e.mm), points: true },
      { x: [1, idx.length], y: [r.refined.mm, r.refined.mm], color: COLORS[2] },
    ],
    "block error [mm] vs block; green = refined",
  );
  const mean = r.raw.reduce((a, e) => a + e.mm, 0) / r.raw.length;
  out.textContent =
    `raw mean ${fmt(mean)} mm over ${r.raw.length} blocks\n` +
    `refined ${fmt(r.refined.mm)} mm / ${fmt(r.refined.deg)} deg\n` +
    `single solve on all stations ${fmt(r.single_solve.mm)} mm / ${fmt(r.single_solve.deg)} deg`;
}

function runFusion(out) {
  const r = JSON.parse(fusion_demo(num("fu-seed"), num("fu-period"), num("fu-jerk"), num("fu-ang")));
  plotLines(
    document.getElementById("fu-plot"),
    r.streams.map((s) => ({ x: s.series.t, y: s.series.mm })),
    "camera error [mm] vs t [s]",
  );
  document.getElementById("fu-legend").innerHTML = r.streams
    .map((s, i) => `<span style="color:${COLORS[i]}">&#9632; ${s.name}</span>`)
    .join("");
  out.textContent = r.streams
    .map((s) => `${s.name.padEnd(8)} mean ${fmt(s.stats.mean.mm)} mm / ${fmt(s.stats.mean.deg)} deg, max ${fmt(s.stats.max.mm)} mm`)
    .join("\n");
}

await init();
document.getElementById("st-run").addEventListener("click", guard("st-out", runStability));
document.getElementById("he-run").addEventListener("click", guard("he-out", runHandeye));
document.getElementById("fu-run").addEventListener("click", guard("fu-out", runFusion));
