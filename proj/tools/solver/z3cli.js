#!/usr/bin/env node
// SMT-LIB2 command-line front end over the z3 WASM build.
// Usage: z3cli2.js [-T:seconds] FILE   (FILE of "-" reads stdin)
// Evaluates the script; if the final verdict is sat, prints the values of
// all declare-const'd symbols as a (get-value ...) form on the same context.
'use strict';
const fs = require('fs');
const path = require('path');

async function main() {
  const args = process.argv.slice(2);
  let timeoutMs = 0;
  let file = null;
  for (const a of args) {
    if (a.startsWith('-T:')) timeoutMs = Math.round(parseFloat(a.slice(3)) * 1000);
    else if (a.startsWith('-t:')) timeoutMs = Math.round(parseFloat(a.slice(3)));
    else file = a;
  }
  const script = fs.readFileSync(file === '-' || file == null ? 0 : file, 'utf8');
  const initModule = require(path.join(__dirname, 'node_modules', 'z3-solver', 'build', 'z3-built.js'));
  const em = await initModule();
  if (typeof em._set_noop_error_handler === 'function') em._set_noop_error_handler();
  if (timeoutMs > 0) em.ccall('Z3_global_param_set', 'void', ['string', 'string'], ['timeout', String(timeoutMs)]);
  const cfg = em.ccall('Z3_mk_config', 'number', [], []);
  const ctx = em.ccall('Z3_mk_context', 'number', ['number'], [cfg]);
  em.ccall('Z3_del_config', 'void', ['number'], [cfg]);
  const evalSmt = (s) => em.ccall('Z3_eval_smtlib2_string', 'string', ['number', 'string'], [ctx, s]);
  let code = 0;
  try {
    let out = '';
    try {
      out = evalSmt(script);
    } catch (e) {
      out = '(error "' + String((e && e.message) || e).replace(/"/g, "'") + '")';
      code = 1;
    }
    process.stdout.write(out);
    if (!out.endsWith('\n')) process.stdout.write('\n');
    const lines = out.trim().split('\n');
    const verdict = lines[lines.length - 1].trim();
    if (verdict === 'sat') {
      const vars = [];
      const re = /\(declare-const\s+([^\s()]+)/g;
      let m;
      while ((m = re.exec(script)) !== null) vars.push(m[1]);
      if (vars.length > 0) {
        try {
          const mv = evalSmt('(get-value (' + vars.join(' ') + '))');
          process.stdout.write(mv);
          if (!mv.endsWith('\n')) process.stdout.write('\n');
        } catch (e) {
          process.stdout.write('(error "model unavailable")\n');
        }
      }
    }
  } finally {
    try { em.PThread.terminateAllThreads(); } catch (_) {}
  }
  process.exit(code);
}
main();
