import init, { coin_distribution, simulate, curves } from "./pkg/committee_ba_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function fail(outId, e) {
  $(outId).innerHTML = `<span class="err">${e.message ?? e}</span>`;
}

function axes(ctx, w, h, pad) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(pad, pad / 2);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad / 2, h - pad);
  ctx.stroke();
}

function drawCoin(r) {
  const cv = $("coin-canvas"), ctx = cv.getContext("2d");
  const pad = 30, w = cv.width, h = cv.height;
  axes(ctx, w, h, pad);
  const xs = r.histogram.map((p) => p[0]);
  const lo = Math.min(...xs), hi = Math.max(...xs);
  const peak = Math.max(...r.histogram.map((p) => p[1]));
  const sx = (x) => pad + ((x - lo) / Math.max(1, hi - lo)) * (w - 1.5 * pad);
  const bar = Math.max(1, (w - 1.5 * pad) / Math.max(1, (hi - lo) / 2 + 1) - 1);
  for (const [x, c] of r.histogram) {
    // Sums in [-f, f) are the ones the adversary can split.
    ctx.fillStyle = x >= -r.f && x < r.f ? "#d55" : "#48c";
    const bh = (c / peak) * (h - 1.5 * pad);
    ctx.fillRect(sx(x) - bar / 2, h - pad - bh, bar, bh);
  }
  ctx.fillStyle = "#222";
  ctx.fillText(String(lo), pad, h - pad + 14);
  ctx.fillText(String(hi), w - pad - 20, h - pad + 14);
  ctx.fillText("0", sx(0), h - pad + 14);
}

function runCoin() {
  try {
    const r = JSON.parse(coin_distribution(num("coin-n"), num("coin-f"), num("coin-trials"), num("coin-seed")));
    const ok = (p) => (p >= r.floor ? "above 1/12" : "BELOW 1/12");
    $("coin-out").textContent =
      `g = ${r.g} honest contributors, ${r.trials} samples\n` +
      `Pr(X > f)  = ${r.above.toFixed(4)}  (${ok(r.above)})\n` +
      `Pr(X < -f) = ${r.below.toFixed(4)}  (${ok(r.below)})\n` +
      `all honest nodes agree on the coin: ${r.agreement.toFixed(4)}\n` +
      `Paley-Zygmund lower bound on Pr(|X| > sqrt(n)/2): ${r.pz_bound.toFixed(4)}`;
    drawCoin(r);
  } catch (e) {
    fail("coin-out", e);
  }
}

function drawSim(audits, n) {
  const cv = $("sim-canvas"), ctx = cv.getContext("2d");
  const pad = 30, w = cv.width, h = cv.height;
  axes(ctx, w, h, pad);
  if (audits.length === 0) return;
  const step = (w - 1.5 * pad) / audits.length;
  audits.forEach((a, i) => {
    const x = pad + i * step + 1;
    const live = Math.max(1, a.honest_live);
    const oneH = (a.honest_ones / n) * (h - 1.5 * pad);
    const zeroH = ((live - a.honest_ones) / n) * (h - 1.5 * pad);
    ctx.fillStyle = "#48c";
    ctx.fillRect(x, h - pad - oneH, step - 2, oneH);
    ctx.fillStyle = "#ccc";
    ctx.fillRect(x, h - pad - oneH - zeroH, step - 2, zeroH);
    if (a.spoiled) {
      ctx.fillStyle = "#d55";
      ctx.fillRect(x, pad / 2 - 6, step - 2, 5);
    }
  });
  ctx.fillStyle = "#222";
  ctx.fillText("blue: honest holding 1, grey: holding 0, red mark: committee spoiled", pad + 4, pad / 2 + 12);
}

function runSim() {
  try {
    const r = JSON.parse(simulate(
      num("sim-n"), num("sim-t"), num("sim-alpha"),
      $("sim-adv").value, $("sim-inputs").value, num("sim-seed"), $("sim-lv").checked));
    const res = r.result;
    $("sim-out").textContent =
      `c = ${r.c} committees of s = ${r.s}\n` +
      `decision: ${res.agreement ? (res.outputs[0]?.[1] ? 1 : 0) : "none"}, ` +
      `phases ${res.phases_used}, corrupted ${res.q}, spoiled phases ${res.spoiled_phases}, ` +
      `messages ${res.messages_sent}` +
      (res.violations.length ? `\nviolations: ${JSON.stringify(res.violations)}` : "");
    drawSim(res.audits, res.n);
    const rows = res.audits.map((a) =>
      `<tr><td>${a.phase}</td><td>${a.slot}</td><td>${a.assigned_value ?? "-"}</td>` +
      `<td>${a.decided_round1.length}</td><td>${a.coin_output ?? "-"}</td>` +
      `<td>${a.coin_takers[0]}/${a.coin_takers[1]}</td><td>${a.finished}</td>` +
      `<td>${a.corrupted}</td><td>${a.spoiled ? "yes" : ""}</td></tr>`);
    $("sim-table").innerHTML =
      "<tr><th>phase</th><th>committee</th><th>assigned</th><th>decided r1</th><th>coin</th>" +
      "<th>coin 0/1</th><th>finished</th><th>corrupted</th><th>spoiled</th></tr>" + rows.join("");
  } catch (e) {
    fail("sim-out", e);
    $("sim-table").innerHTML = "";
  }
}

function runCurves() {
  try {
    const r = JSON.parse(curves(num("cur-n"), num("cur-x"), 100));
    const cv = $("cur-canvas"), ctx = cv.getContext("2d");
    const pad = 40, w = cv.width, h = cv.height;
    axes(ctx, w, h, pad);
    const pts = r.points;
    const xmax = pts[pts.length - 1].x || 1;
    const ymax = Math.max(...pts.map((p) => Math.max(p.upper_new, p.upper_cc, p.lower_bb))) || 1;
    const sx = (x) => pad + (x / xmax) * (w - 1.5 * pad);
    const sy = (y) => h - pad - (y / ymax) * (h - 1.5 * pad);
    const series = [["upper_cc", "#aaa", "shared coin"], ["upper_new", "#48c", "committee coin"], ["lower_bb", "#d55", "lower bound"]];
    series.forEach(([key, color, label], i) => {
      ctx.strokeStyle = color;
      ctx.lineWidth = 2;
      ctx.beginPath();
      pts.forEach((p, j) => (j ? ctx.lineTo(sx(p.x), sy(p[key])) : ctx.moveTo(sx(p.x), sy(p[key]))));
      ctx.stroke();
      ctx.fillStyle = color;
      ctx.fillText(label, pad + 8, pad / 2 + 14 * (i + 1));
    });
    ctx.fillStyle = "#222";
    ctx.fillText(xmax.toFixed(0), w - pad - 10, h - pad + 14);
    ctx.fillText(ymax.toFixed(1), 2, pad / 2 + 4);
    $("cur-out").textContent = `crossover n / log^2 n = ${r.crossover.toFixed(2)}`;
  } catch (e) {
    fail("cur-out", e);
  }
}

await init();
$("coin-go").onclick = runCoin;
$("sim-go").onclick = runSim;
$("cur-go").onclick = runCurves;
runCoin();
runSim();
runCurves();
