import init, { covering, spectrum, heat_row } from "./pkg/czhardy_wasm.js";

const NS = "http://www.w3.org/2000/svg";

function el(name, attrs, parent) {
  const e = document.createElementNS(NS, name);
  for (const [k, v] of Object.entries(attrs)) e.setAttribute(k, v);
  parent.appendChild(e);
  return e;
}

function params(section) {
  const out = {};
  for (const i of section.querySelectorAll("input")) out[i.name] = i.value;
  return out;
}

// Breadth-first order puts each level left to right, children under their parent.
function positions(tree, width, height) {
  const levels = tree.levels;
  const top = Math.max(...levels), bottom = Math.min(...levels);
  const rows = new Map();
  levels.forEach((l, i) => { if (!rows.has(l)) rows.set(l, []); rows.get(l).push(i); });
  const pos = new Array(levels.length);
  const dy = (height - 30) / Math.max(1, top - bottom);
  for (const [l, ids] of rows) {
    ids.forEach((v, k) => { pos[v] = [(k + 0.5) * width / ids.length, 15 + (top - l) * dy]; });
  }
  return pos;
}

function drawTree(svg, tree, fill, onClick) {
  svg.replaceChildren();
  const w = +svg.getAttribute("width"), h = +svg.getAttribute("height");
  const pos = positions(tree, w, h);
  tree.parents.forEach((p, v) => {
    if (p === null) return;
    el("line", { x1: pos[v][0], y1: pos[v][1], x2: pos[p][0], y2: pos[p][1], stroke: "#ddd" }, svg);
  });
  const r = Math.max(1.5, Math.min(5, w / (3 * tree.parents.length ** 0.8)));
  pos.forEach(([x, y], v) => {
    const c = el("circle", { cx: x, cy: y, r, fill: fill(v) }, svg);
    if (onClick) { c.style.cursor = "pointer"; c.addEventListener("click", () => onClick(v)); }
  });
  return pos;
}

function guard(section, f) {
  const out = section.querySelector(".out");
  try { out.classList.remove("err"); f(out); }
  catch (e) { out.classList.add("err"); out.textContent = String(e); }
}

function runCovering() {
  const s = document.getElementById("covering");
  guard(s, (out) => {
    const a = params(s);
    const r = JSON.parse(covering(+a.q, +a.depth, +a.p, a.lambda, +a.seed));
    const inLevel = new Set(r.level_set);
    const shade = new Map();
    const hues = [200, 40, 120, 280, 340, 80];
    r.sets.forEach((set, i) => set.envelope.forEach((v) => { if (!shade.has(v)) shade.set(v, hues[i % hues.length]); }));
    drawTree(s.querySelector("svg"), r.tree, (v) =>
      inLevel.has(v) ? "#c22" : shade.has(v) ? `hsl(${shade.get(v)} 60% 75%)` : "#999");
    out.textContent = [
      `selected sets: ${r.sets.map((x) => `${x.record.root_word}/h=${x.record.h}`).join(", ") || "none"}`,
      `‖f‖ₚᵖ = ${r.lp_pow}, ∑μ(Rᵢ) = ${r.sum_mu_selected}, μ(⋃R̃ᵢ) = ${r.mu_union}`,
      `certificate: ${JSON.stringify(r.certificate)}`,
    ].join("\n");
  });
}

function runSpectrum() {
  const s = document.getElementById("spectrum");
  guard(s, (out) => {
    const a = params(s);
    const r = JSON.parse(spectrum(+a.q, +a.depth));
    const svg = s.querySelector("svg");
    svg.replaceChildren();
    const w = +svg.getAttribute("width"), h = +svg.getAttribute("height");
    const bins = new Array(80).fill(0);
    for (const v of r.values) bins[Math.min(79, Math.max(0, Math.floor(v / 2 * 80)))]++;
    const peak = Math.max(...bins);
    bins.forEach((n, i) => {
      const bh = (h - 20) * n / peak;
      el("rect", { x: i * w / 80 + 1, y: h - 10 - bh, width: w / 80 - 2, height: bh, fill: "#4a7ab0" }, svg);
    });
    for (const x of [r.formula_min, r.formula_max]) {
      el("line", { x1: x / 2 * w, x2: x / 2 * w, y1: 0, y2: h, stroke: "#c22", "stroke-dasharray": "4 3" }, svg);
    }
    out.textContent = `dim ${r.dim}; λmin ${r.values[0].toFixed(6)} (closed form ${r.formula_min.toFixed(6)}); ` +
      `λmax ${r.values[r.dim - 1].toFixed(6)} (closed form ${r.formula_max.toFixed(6)}); margin ${r.margin.toExponential(3)}`;
  });
}

function runHeat() {
  const s = document.getElementById("heat");
  guard(s, (out) => {
    const a = params(s);
    const r = JSON.parse(heat_row(+a.q, +a.depth, +a.t, +a.vertex));
    const top = Math.max(...r.mass.map(Math.abs));
    drawTree(s.querySelector("svg"), r.tree, (v) => {
      if (v === r.vertex) return "#c22";
      const m = Math.abs(r.mass[v]) / top;
      return `hsl(220 70% ${Math.round(95 - 70 * Math.sqrt(m))}%)`;
    }, (v) => { s.querySelector("input[name=vertex]").value = v; runHeat(); });
    out.textContent = `x = ${r.label} (vertex ${r.vertex}); ∑ K(x,y)μ(y) = ${r.total_mass.toFixed(6)}`;
  });
}

await init();
for (const [id, run] of [["covering", runCovering], ["spectrum", runSpectrum], ["heat", runHeat]]) {
  document.querySelector(`#${id} button`).addEventListener("click", run);
  run();
}
