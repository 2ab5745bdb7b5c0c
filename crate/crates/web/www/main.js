import init, { corrugation_heatmap, decompose_2x2, ledger_json } from "./pkg/corrugate_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function color(t) {
  // blue through white to red
  const r = t < 0.5 ? 2 * t : 1;
  const b = t > 0.5 ? 2 * (1 - t) : 1;
  const g = 1 - Math.abs(2 * t - 1);
  return [r * 255, (0.5 * g + 0.5 * Math.min(r, b)) * 255, b * 255];
}

function drawHeatmap() {
  for (const id of ["mu", "angle", "amp"]) $(id + "-v").textContent = $(id).value;
  let map;
  try {
    map = corrugation_heatmap(128, num("mu"), num("angle"), num("amp"));
  } catch (e) {
    $("heat-out").textContent = String(e);
    return;
  }
  const w = map.width(), h = map.height(), values = map.values();
  const scale = Math.max(Math.abs(map.min()), Math.abs(map.max())) || 1;
  const img = new ImageData(w, h);
  for (let i = 0; i < w * h; i++) {
    const [r, g, b] = color(0.5 + 0.5 * values[i] / scale);
    img.data.set([r, g, b, 255], 4 * i);
  }
  const canvas = $("heat");
  const tmp = new OffscreenCanvas(w, h);
  tmp.getContext("2d").putImageData(img, 0, 0);
  const ctx = canvas.getContext("2d");
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
  $("heat-out").textContent =
    `min  ${map.min().toExponential(3)}\nmax  ${map.max().toExponential(3)}\n` +
    `step error  ${map.step_error().toExponential(3)}`;
  map.free();
}

function drawDecomposition() {
  const d = decompose_2x2(num("d11"), num("d12"), num("d22"), num("rot"));
  const a = d.amplitudes(), xi = d.directions();
  const svg = $("frame");
  const lines = [];
  for (let i = 0; i < 3; i++) {
    const len = a[i] * a[i];
    const [x, y] = [xi[2 * i] * len, -xi[2 * i + 1] * len];
    lines.push(`<line x1="${-x}" y1="${-y}" x2="${x}" y2="${y}" stroke="hsl(${120 * i},70%,40%)" stroke-width="0.04"/>`);
  }
  svg.innerHTML = `<circle r="1" fill="none" stroke="#ddd" stroke-width="0.01"/>` + lines.join("");
  $("dec-out").textContent =
    a.map((v, i) => `a${i + 1} = ${v.toFixed(6)}  ξ${i + 1} = (${xi[2 * i].toFixed(3)}, ${xi[2 * i + 1].toFixed(3)})`).join("\n") +
    `\n|D − Id| = ${d.distance().toExponential(3)}, σ* = ${d.sigma_star().toExponential(3)}` +
    `\nreconstruction error ${d.reconstruction_error().toExponential(2)}` +
    (d.clamped() ? "\noutside the σ* ball: projected onto it" : "");
  d.free();
}

function runLedger() {
  let out;
  try {
    out = JSON.parse(ledger_json(parseInt($("n").value), num("alpha"), parseInt($("qmax").value)));
  } catch (e) {
    $("ledger-out").textContent = String(e);
    return;
  }
  const head = `threshold 1/(1+n+n²) = ${out.threshold.toFixed(6)}\n`;
  if (!out.feasible) {
    $("ledger-out").textContent = head + `infeasible: ${out.reason}`;
    $("ledger").innerHTML = "";
    return;
  }
  const s = out.schedule;
  $("ledger-out").textContent = head +
    `feasible after ${out.candidates_tried} candidates: ln a = ${s.ln_a.toFixed(3)}, b = ${s.b}, c = ${s.c.toFixed(3)}, ` +
    `largest frequency e^${s.ln_max_frequency.toFixed(1)}`;
  const rows = out.entries.map((e) =>
    `<tr class="${e.pass ? "" : "fail"}"><td>${e.name}</td><td>${e.statement}</td>` +
    `<td>${e.q_from}–${e.q_to}</td><td>${e.worst_margin.toExponential(3)}</td><td>${e.pass ? "pass" : "FAIL"}</td></tr>`);
  $("ledger").innerHTML = "<tr><th>entry</th><th>statement</th><th>q</th><th>margin</th><th></th></tr>" + rows.join("");
}

await init();
for (const id of ["mu", "angle", "amp"]) $(id).addEventListener("input", drawHeatmap);
for (const id of ["d11", "d12", "d22", "rot"]) $(id).addEventListener("input", drawDecomposition);
$("search").addEventListener("click", runLedger);
drawHeatmap();
drawDecomposition();
runLedger();
