package demo.text;

import java.util.ArrayList;
import java.util.Comparator;
import java.util.HashMap;
import java.util.List;
import java.util.Map;

public final class TextStats {

    public static String summarize(String text) {
        String[] words = text.trim().split("\\s+");
        int letters = 0;
        int digits = 0;
        for (char ch : text.toCharArray()) {
            if (Character.isLetter(ch)) {
                letters++;
            } else if (Character.isDigit(ch)) {
                digits++;
            }
        }

        Map<String, Integer> freq = new HashMap<>();
        for (String w : words) {
            String key = w.toLowerCase();
            freq.merge(key, 1, Integer::sum);
        }

        List<String> top = new ArrayList<>(freq.keySet());
        top.sort(Comparator.comparing((String w) -> -freq.get(w)).thenComparing(w -> w));
        if (top.size() > 3) {
            top = top.subList(0, 3);
        }

        return words.length + " words, " + letters + " letters, " + digits + " digits, top " + top;
    }

    public static int clamp(int v, int lo, int hi) {
        int r = Math.max(lo, v);
        return Math.min(hi, r);
    }

    public static String longestLine(String text) {
        String best = "";
        for (String line : text.split("\n")) {
            String trimmed = line.strip();
            if (trimmed.length() > best.length()) {
                best = trimmed;
            }
        }
        return best;
    }
}
