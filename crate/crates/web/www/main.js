import init, {
  simulateAndCorrelate,
  fixtureParticipants,
  fixtureCurve,
  spearman,
} from "./pkg/mobilitycorr_web.js";

const $ = (id) => document.getElementById(id);
const call = (f, ...args) => JSON.parse(f(...args));
const fmt = (v, d = 3) => (v === null || v === undefined ? "N/A" : Number(v).toFixed(d));
const fmtP = (v) => (v === null || v === undefined ? "N/A" : Number(v).toExponential(1));

// Line/point plot on a canvas. Each series: {xs, ys, color, kind: "line"|"dots"|"step"}.
// `vlines` are x positions drawn as thin dashed rules.
function plot(canvas, series, { vlines = [], yLabel = "" } = {}) {
  const dpr = window.devicePixelRatio || 1;
  const w = canvas.clientWidth, h = canvas.clientHeight;
  canvas.width = w * dpr;
  canvas.height = h * dpr;
  const ctx = canvas.getContext("2d");
  ctx.scale(dpr, dpr);
  ctx.clearRect(0, 0, w, h);

  const all = series.flatMap((s) => s.xs.map((x, i) => [x, s.ys[i]]));
  if (all.length === 0) return;
  const pad = { l: 48, r: 10, t: 10, b: 24 };
  let [x0, x1] = [Math.min(...all.map((p) => p[0])), Math.max(...all.map((p) => p[0]))];
  let [y0, y1] = [Math.min(0, ...all.map((p) => p[1])), Math.max(...all.map((p) => p[1]))];
  if (x1 === x0) x1 = x0 + 1;
  if (y1 === y0) y1 = y0 + 1;
  const sx = (x) => pad.l + ((x - x0) / (x1 - x0)) * (w - pad.l - pad.r);
  const sy = (y) => h - pad.b - ((y - y0) / (y1 - y0)) * (h - pad.t - pad.b);

  ctx.strokeStyle = "#ccc";
  ctx.fillStyle = "#666";
  ctx.font = "11px system-ui";
  ctx.beginPath();
  ctx.moveTo(pad.l, pad.t);
  ctx.lineTo(pad.l, h - pad.b);
  ctx.lineTo(w - pad.r, h - pad.b);
  ctx.stroke();
  for (let k = 0; k <= 4; k++) {
    const y = y0 + ((y1 - y0) * k) / 4;
    ctx.fillText(y.toFixed(y1 - y0 < 10 ? 1 : 0), 4, sy(y) + 4);
  }
  ctx.fillText(yLabel, pad.l + 4, pad.t + 10);
  ctx.fillText("day " + x0, pad.l, h - 6);
  ctx.fillText("day " + x1, w - pad.r - 40, h - 6);

  ctx.setLineDash([3, 3]);
  ctx.strokeStyle = "#999";
  for (const x of vlines) {
    ctx.beginPath();
    ctx.moveTo(sx(x), pad.t);
    ctx.lineTo(sx(x), h - pad.b);
    ctx.stroke();
  }
  ctx.setLineDash([]);

  for (const s of series) {
    ctx.strokeStyle = ctx.fillStyle = s.color;
    if (s.kind === "dots") {
      s.xs.forEach((x, i) => ctx.fillRect(sx(x) - 1.5, sy(s.ys[i]) - 1.5, 3, 3));
    } else {
      ctx.lineWidth = 1.8;
      ctx.beginPath();
      s.xs.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(s.ys[i])) : ctx.moveTo(sx(x), sy(s.ys[i]))));
      ctx.stroke();
      ctx.lineWidth = 1;
      if (s.marks) s.xs.forEach((x, i) => ctx.fillRect(sx(x) - 3, sy(s.ys[i]) - 3, 6, 6));
    }
  }
}

const dayNumber = (origin) => (d) => Math.round((Date.parse(d) - Date.parse(origin)) / 86400000);

let lastSim = null;

function runSimulation() {
  const form = $("sim-form");
  const v = (n) => Number(form.querySelector(`[name=${n}]`).value);
  const res = call(
    simulateAndCorrelate,
    v("seed"), v("days"), v("sensors"), v("base_rate"), v("trend"), v("noise"), v("coupling"),
  );
  if (res.error) {
    $("sim-table").innerHTML = `<p class="error">${res.error}</p>`;
    return;
  }
  lastSim = res;
  const day = dayNumber(res.assessment_dates[0]);
  const xs = res.dates.map(day);
  plot($("sim-canvas"), [
    { xs, ys: res.activity, color: "#7aa6d6", kind: "dots" },
    { xs, ys: res.expected, color: "#d95f02", kind: "line" },
  ], { vlines: res.assessment_dates.map(day), yLabel: "occupied windows per sensor" });

  const rows = res.correlations.map((c) => {
    const strong = c.rho !== null && Math.abs(c.rho) >= 0.3;
    return `<tr class="${strong ? "notable" : ""}"><td>${c.assessment}</td><td>${fmt(c.rho)}</td>` +
      `<td>${fmtP(c.p)}</td><td>${c.effect ?? c.reason}</td><td>${c.n_pairs}</td></tr>`;
  });
  $("sim-table").innerHTML =
    "<table><tr><th>assessment</th><th>rho</th><th>p</th><th>effect</th><th>pairs</th></tr>" +
    rows.join("") + "</table>";

  const sel = $("sim-assessment");
  const keep = sel.value;
  sel.innerHTML = res.paired.map((p) => `<option>${p.assessment}</option>`).join("");
  if ([...sel.options].some((o) => o.value === keep)) sel.value = keep;
  drawPaired();
}

function drawPaired() {
  if (!lastSim) return;
  const p = lastSim.paired.find((q) => q.assessment === $("sim-assessment").value);
  if (!p) return;
  const day = dayNumber(lastSim.assessment_dates[0]);
  const xs = p.dates.map(day);
  // Scale the score curve onto the activity axis so both shapes are visible.
  const amax = Math.max(...p.activity), smax = Math.max(...p.score.map(Math.abs), 1e-9);
  plot($("pair-canvas"), [
    { xs, ys: p.activity, color: "#1b9e77", kind: "line" },
    { xs, ys: p.score.map((s) => (s / smax) * amax), color: "#7570b3", kind: "line" },
  ], { yLabel: `regressed activity (green), ${p.assessment} spline rescaled (purple)` });
}

function drawFixture() {
  const res = call(fixtureCurve, $("fx-participant").value, $("fx-assessment").value);
  if (res.error) {
    $("fx-msg").innerHTML = `<p class="error">${res.error}</p>`;
    plot($("fx-canvas"), []);
    return;
  }
  $("fx-msg").textContent = `${res.knots.length} scored visits`;
  const day = dayNumber(res.dates[0]);
  plot($("fx-canvas"), [
    { xs: res.dates.map(day), ys: res.values, color: "#7570b3", kind: "line" },
    { xs: res.knots.map((k) => day(k[0])), ys: res.knots.map((k) => k[1]), color: "#d95f02", kind: "line", marks: true },
  ], { yLabel: res.assessment });
}

function runSpearman() {
  const res = call(spearman, $("sp-x").value, $("sp-y").value);
  if (res.error) {
    $("sp-out").innerHTML = `<p class="error">${res.error}</p>`;
    return;
  }
  $("sp-out").innerHTML =
    `<table><tr><th></th><th>value</th></tr>` +
    `<tr><td>x ranks</td><td>${res.x_ranks.join(", ")}</td></tr>` +
    `<tr><td>y ranks</td><td>${res.y_ranks.join(", ")}</td></tr>` +
    `<tr><td>rho</td><td>${fmt(res.rho, 4)}${res.effect ? " (" + res.effect + ")" : ""}</td></tr>` +
    `<tr><td>p, t approximation</td><td>${fmt(res.p_t, 4)}</td></tr>` +
    `<tr><td>p, exact permutation</td><td>${fmt(res.p_exact, 4)}</td></tr></table>`;
}

await init();
$("fx-participant").innerHTML = call(fixtureParticipants).map((p) => `<option>${p}</option>`).join("");
$("sim-run").addEventListener("click", runSimulation);
$("sim-assessment").addEventListener("change", drawPaired);
$("fx-participant").addEventListener("change", drawFixture);
$("fx-assessment").addEventListener("change", drawFixture);
$("sp-x").addEventListener("input", runSpearman);
$("sp-y").addEventListener("input", runSpearman);
window.addEventListener("resize", () => { runSimulation(); drawFixture(); });
runSimulation();
drawFixture();
runSpearman();
